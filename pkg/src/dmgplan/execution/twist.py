"""Twists, dual-arm task-space coordination and the two push-motion templates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FRAMES = ("world", "gripper1")

V_MAX = 0.05
K_P = 2.0


@dataclass(frozen=True)
class Twist:
    """Linear velocity ``v`` (m/s) and angular velocity ``w`` (rad/s)."""

    v: np.ndarray
    w: np.ndarray
    frame: str = "world"

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3)
        w = np.asarray(self.w, dtype=float).reshape(3)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("twist components must be finite")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @classmethod
    def zero(cls, frame="world") -> "Twist":
        return cls(np.zeros(3), np.zeros(3), frame)

    @classmethod
    def from_vector(cls, x, frame="world") -> "Twist":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3], x[3:], frame)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    def rotated(self, R, frame="world") -> "Twist":
        """Same twist with both parts expressed through rotation ``R``."""
        R = np.asarray(R, dtype=float)
        return Twist(R @ self.v, R @ self.w, frame)

    def __add__(self, other: "Twist") -> "Twist":
        _same_frame(self, other)
        return Twist(self.v + other.v, self.w + other.w, self.frame)

    def __sub__(self, other: "Twist") -> "Twist":
        _same_frame(self, other)
        return Twist(self.v - other.v, self.w - other.w, self.frame)

    def __mul__(self, s: float) -> "Twist":
        return Twist(self.v * s, self.w * s, self.frame)

    __rmul__ = __mul__

    def __neg__(self) -> "Twist":
        return Twist(-self.v, -self.w, self.frame)


def _same_frame(a: Twist, b: Twist):
    if a.frame != b.frame:
        raise ValueError(f"twists in different frames ({a.frame} vs {b.frame})")


@dataclass(frozen=True)
class EctsCommand:
    """Absolute and relative task twists and the share ``alpha`` of arm 1."""

    absolute: Twist
    relative: Twist
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def ects_matrix(alpha: float) -> np.ndarray:
    """12x12 map from stacked arm twists ``(x1, x2)`` to ``(absolute, relative)``."""
    I = np.eye(6)
    return np.block([[alpha * I, (1.0 - alpha) * I], [-I, I]])


def ects_compose(x1: Twist, x2: Twist, alpha: float) -> EctsCommand:
    """Task twists produced by the arm twists ``x1`` and ``x2``."""
    return EctsCommand(alpha * x1 + (1.0 - alpha) * x2, x2 - x1, alpha)


def ects_solve(cmd: EctsCommand) -> tuple[Twist, Twist]:
    """Arm twists realising ``cmd``.

    From ``a = alpha x1 + (1 - alpha) x2`` and ``r = x2 - x1``:
    ``x1 = a - (1 - alpha) r`` and ``x2 = a + alpha r``.
    """
    a, r, al = cmd.absolute, cmd.relative, cmd.alpha
    return a - (1.0 - al) * r, a + al * r


def translation_twist(t, R_g, k_p: float = K_P, error: float = 0.0,
                      v_max: float = V_MAX) -> Twist:
    """Relative twist that slides the held fingertip along ``t``.

    ``t`` is the fingertip displacement in the holding gripper's frame and
    ``R_g`` that gripper's world orientation.  The object is pushed the
    opposite way with speed ``clamp(k_p * error, 0, v_max)``.
    """
    t = np.asarray(t, dtype=float)
    n = float(np.linalg.norm(t))
    if n == 0.0:
        raise ValueError("translation must be nonzero")
    t_world = np.asarray(R_g, dtype=float) @ t
    direction = -t_world / np.linalg.norm(t_world)
    m = min(max(k_p * error, 0.0), v_max)
    return Twist(m * direction, np.zeros(3))


def rotation_twist(phi0: float, gamma: float, gamma_dot: float, radius: float = 1.0) -> Twist:
    """Relative twist, in the holding gripper's frame, that swings the push point.

    The push point sits at angle ``phi0 + gamma`` from the finger in the
    gripper's yz plane, ``radius`` away from the fingertip contact; the
    object turns about the gripper x axis at rate ``gamma_dot``.
    """
    a = phi0 + gamma
    return Twist(radius * np.array([0.0, -math.sin(a) * gamma_dot, math.cos(a) * gamma_dot]),
                 np.array([gamma_dot, 0.0, 0.0]), "gripper1")


def integrate_rotation(phi0: float, gamma_k: float, t0: float = 0.0, tf: float = 1.0,
                       dt: float = 1e-4, radius: float = 1.0):
    """Push-point track under a constant-rate rotation from 0 to ``-gamma_k``.

    Integrates the linear part of :func:`rotation_twist` with classical RK4
    and returns ``(times, points)`` with points in the gripper frame.
    """
    if not tf > t0 or not dt > 0:
        raise ValueError("need tf > t0 and dt > 0")
    n = max(1, int(round((tf - t0) / dt)))
    h = (tf - t0) / n
    rate = -gamma_k / (tf - t0)

    def f(t):
        return rotation_twist(phi0, rate * (t - t0), rate, radius).v

    times = t0 + h * np.arange(n + 1)
    pts = np.empty((n + 1, 3))
    pts[0] = radius * np.array([0.0, math.cos(phi0), math.sin(phi0)])
    for i in range(n):
        t = times[i]
        k1, k2, k4 = f(t), f(t + h / 2), f(t + h)
        # the field depends on time only, so the two midpoint stages coincide
        pts[i + 1] = pts[i] + h / 6 * (k1 + 4 * k2 + k4)
    return times, pts


def swept_angle(points) -> float:
    """Unwrapped angle swept in the yz plane by a point track."""
    pts = np.asarray(points, dtype=float)
    ang = np.unwrap(np.arctan2(pts[:, 2], pts[:, 1]))
    return float(ang[-1] - ang[0])
