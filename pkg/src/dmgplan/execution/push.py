"""Where the pushing gripper touches the object for each in-hand primitive."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NoPushPoint
from ..geometry.mesh import SurfaceModel
from ..inhand.types import GraspConfig


def _midpoint(grasp: GraspConfig) -> np.ndarray:
    a, b = grasp.grasp_line
    return 0.5 * (a + b)


def finger_direction(frame, angle: float) -> np.ndarray:
    """Model-frame finger direction for ``angle`` in a component frame (rows x, y, z)."""
    F = np.asarray(frame, dtype=float)
    return math.cos(angle) * F[1] + math.sin(angle) * F[2]


def rotation_depth(model: SurfaceModel, grasp: GraspConfig, frame) -> float:
    """Default probe offset: half the object's extent behind the finger, from the grasp midpoint."""
    d = finger_direction(frame, grasp.principal.angle)
    hits = model.raycast(_midpoint(grasp), -d)
    if not hits:
        raise NoPushPoint("grasp midpoint is not inside the object")
    return 0.5 * hits[0].distance


def find_push_point(model: SurfaceModel, grasp: GraspConfig, primitive, frame=None,
                    d_p: float | None = None) -> np.ndarray:
    """Contact point for the pusher.

    ``primitive`` is ``("translate", t)`` with ``t`` the fingertip
    displacement in the model frame, or ``("rotate", gamma)`` with ``gamma``
    in radians (``frame`` is then the principal component's frame).

    Translation: the outermost surface point on the ray from the grasp-line
    midpoint along ``t``; pushing it back along ``-t`` slides the fingertip
    forward.  Rotation: the outermost point on a line across the finger,
    shifted ``d_p`` behind it, on the side that turns the object against
    ``gamma``.
    """
    kind, value = primitive
    m = _midpoint(grasp)
    if kind == "translate":
        t = np.asarray(value, dtype=float)
        n = float(np.linalg.norm(t))
        if n == 0:
            raise ValueError("zero translation has no push point")
        hits = model.raycast(m, t / n)
        if not hits or hits[-1].distance <= n:
            raise NoPushPoint("object too short beyond the grasp along the translation")
        return hits[-1].point
    if kind != "rotate":
        raise ValueError(f"unknown primitive {kind!r}")
    if frame is None:
        raise ValueError("rotation push points need the component frame")
    gamma = float(value)
    if gamma == 0:
        raise ValueError("zero rotation has no push point")
    F = np.asarray(frame, dtype=float)
    d = finger_direction(F, grasp.principal.angle)
    if d_p is None:
        d_p = rotation_depth(model, grasp, F)
    side = np.cross(F[0], d)
    side = -side if gamma > 0 else side
    hits = model.raycast(m - d_p * d, side)
    if not hits:
        raise NoPushPoint("probe line across the finger misses the surface")
    return hits[-1].point
