"""Antipodal grasp candidates on patch centroids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dmg.angles import circular_runs
from ..dmg.graph import DMG
from ..geometry.mesh import SurfaceModel
from ..inhand.search import finger_at, map_steps, secondary_step
from ..inhand.types import GraspConfig


@dataclass(frozen=True)
class AntipodalPair:
    """Two opposing contacts: a patch centroid and the outermost hit behind it."""

    patch1: int
    patch2: int
    p1: tuple
    p2: tuple
    opening: float
    nodes1: tuple
    nodes2: tuple


def approach_clear(model: SurfaceModel, point, normal) -> bool:
    """True if nothing lies on the ray leaving ``point`` along its outward ``normal``."""
    return not model.raycast(point, normal)


def antipodal_pair(dmg: DMG, model: SurfaceModel, patch: int, d_max: float,
                   delta_c: float) -> AntipodalPair | None:
    """The pair anchored at ``patch``'s centroid, or None if it fails any test."""
    if not dmg.nodes_of_patch(patch):
        return None
    p1 = dmg.patch_centroids[patch]
    n1 = dmg.patch_normals[patch]
    hits = model.raycast(p1, -n1)
    if not hits:
        return None
    far = hits[-1]
    opening = float(np.linalg.norm(far.point - p1))
    if opening > d_max:
        return None
    patch2 = int(dmg.triangle_patch[far.triangle])
    n2 = dmg.patch_normals[patch2]
    if not (np.linalg.norm(np.cross(n1, n2)) < delta_c and float(n1 @ n2) < 0):
        return None
    if not dmg.nodes_of_patch(patch2):
        return None
    if not approach_clear(model, p1, n1) or not approach_clear(model, far.point, n2):
        return None
    return AntipodalPair(patch, patch2, tuple(p1), tuple(far.point), opening,
                         tuple(dmg.nodes_of_patch(patch)), tuple(dmg.nodes_of_patch(patch2)))


def antipodal_candidates(dmg: DMG, model: SurfaceModel, constraint=None, d_max: float = 0.08,
                         delta_c: float = 0.4) -> list[AntipodalPair]:
    """All antipodal pairs anchored at node-bearing patch centroids.

    ``constraint = (C_a, C_b)`` keeps pairs whose anchor patch has a node in
    component ``C_a`` and whose opposite patch has a node in ``C_b``.
    """
    if not d_max > 0:
        raise ValueError("d_max must be positive")
    out = []
    for patch in sorted(dmg.patch_nodes):
        pair = antipodal_pair(dmg, model, patch, d_max, delta_c)
        if pair is None:
            continue
        if constraint is not None:
            ca, cb = constraint
            if not any(dmg.nodes[n].component_id == ca for n in pair.nodes1):
                continue
            if not any(dmg.nodes[n].component_id == cb for n in pair.nodes2):
                continue
        out.append(pair)
    return out


def compatible_steps(dmg: DMG, n1: int, n2: int) -> frozenset:
    """Principal orientations at ``n1`` that the opposing finger at ``n2`` also admits."""
    a = dmg.nodes[n1].angular_component.steps
    b = dmg.nodes[n2]
    return frozenset(a & map_steps(dmg, b.angular_component.steps, b.component_id,
                                   dmg.nodes[n1].component_id))


def choose_step(dmg: DMG, n1: int, steps, reference: int | None = None,
                prefer_direction=None) -> int:
    """Pick an orientation from ``steps``.

    With ``prefer_direction`` the finger should point into that half-space;
    among the admissible steps the closest to ``reference`` wins.  Without a
    reference the middle of the widest run is taken (most rotation margin).
    """
    K = dmg.K
    pool = sorted(steps)
    if prefer_direction is not None:
        u = np.asarray(prefer_direction, dtype=float)
        frame = dmg.frame_of(n1)
        facing = [s for s in pool if frame.direction(math.radians(s * dmg.r_angle)) @ u > 0]
        pool = facing or pool
    if reference is not None:
        def gap(s):
            d = (s - reference) % K
            return min(d, K - d)
        return min(pool, key=lambda s: (gap(s), s))
    runs = circular_runs(pool, K)
    widest = max(runs, key=lambda r: (len(r), -r[0]))
    return widest[len(widest) // 2]


def grasp_from_pair(dmg: DMG, pair: AntipodalPair, components=None, reference: int | None = None,
                    prefer_direction=None, gripper_id: int = 1,
                    principal_node: int | None = None) -> GraspConfig | None:
    """Concrete grasp (nodes and orientation) for an antipodal pair, or None."""
    for n1 in ([principal_node] if principal_node is not None else pair.nodes1):
        if components and dmg.nodes[n1].component_id != components[0]:
            continue
        for n2 in pair.nodes2:
            if components and dmg.nodes[n2].component_id != components[1]:
                continue
            steps = compatible_steps(dmg, n1, n2)
            if not steps:
                continue
            k1 = choose_step(dmg, n1, steps, reference, prefer_direction)
            k2 = secondary_step(dmg, n1, k1, n2)
            return GraspConfig(finger_at(dmg, n1, k1), finger_at(dmg, n2, k2), gripper_id)
    return None


def verify_grasp(dmg: DMG, model: SurfaceModel, grasp: GraspConfig, d_max: float,
                 delta_c: float) -> bool:
    """Re-check a grasp against the raw surface: opening, opposition, approach."""
    n1 = dmg.nodes[grasp.principal.node_id]
    n2 = dmg.nodes[grasp.secondary.node_id]
    pair = antipodal_pair(dmg, model, n1.patch_id, d_max, delta_c)
    return pair is not None and pair.patch2 == n2.patch_id


def segment_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between segments ``a0a1`` and ``b0b1``."""
    a0, a1, b0, b1 = (np.asarray(x, dtype=float) for x in (a0, a1, b0, b1))
    u, v, w = a1 - a0, b1 - b0, a0 - b0
    a, b, c, d, e = u @ u, u @ v, v @ v, u @ w, v @ w
    den = a * c - b * b
    cands = []
    if den > 1e-18 * max(a * c, 1e-300):
        s = np.clip((b * e - c * d) / den, 0.0, 1.0)
        t = np.clip((a * e - b * d) / den, 0.0, 1.0) if c > 0 else 0.0
        cands.append((s, t))
    # endpoints against the other segment cover the clamped and parallel cases
    for s in (0.0, 1.0):
        t = np.clip(((a0 + s * u - b0) @ v) / c, 0.0, 1.0) if c > 0 else 0.0
        cands.append((s, t))
    for t in (0.0, 1.0):
        s = np.clip(((b0 + t * v - a0) @ u) / a, 0.0, 1.0) if a > 0 else 0.0
        cands.append((s, t))
    return float(min(np.linalg.norm(a0 + s * u - (b0 + t * v)) for s, t in cands))
