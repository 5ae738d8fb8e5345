"""Finger-versus-object collision tests.

The finger is a segment of length ``l_f`` that starts at the contact point,
lifted by a small clearance along the frame's x axis, and points along
``cos(phi) * y + sin(phi) * z``.  All directions for one contact lie in the
plane through the lifted point spanned by y and z, so the test reduces to a
2-D problem: intersect that plane with the nearby triangles once, then check
every requested angle against the resulting cross-section segments.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidFrame
from .mesh import SurfaceModel

FINGER_CLEARANCE = 1e-3
_PLANE_TOL = 1e-12
_TOUCH_TOL = 1e-9


def check_frame(frame) -> np.ndarray:
    """Return the frame as a 3x3 array of row axes (x, y, z); must be orthonormal."""
    R = np.asarray(getattr(frame, "matrix", frame), dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidFrame("frame must be a finite 3x3 matrix")
    if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
        raise InvalidFrame("frame axes are not orthonormal")
    return R


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _point_seg_dist2(p, a, b):
    ab = b - a
    ll = np.einsum("...i,...i->...", ab, ab)
    t = np.einsum("...i,...i->...", p - a, ab) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    d = a + t[..., None] * ab - p
    return np.einsum("...i,...i->...", d, d)


def segments_intersect_2d(a0, a1, b0, b1, tol=_TOUCH_TOL):
    """Broadcasting 2-D segment intersection test (touching counts)."""
    da, db = a1 - a0, b1 - b0
    d1 = _cross2(da, b0 - a0)
    d2 = _cross2(da, b1 - a0)
    d3 = _cross2(db, a0 - b0)
    d4 = _cross2(db, a1 - b0)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    tol2 = tol * tol
    near = ((_point_seg_dist2(b0, a0, a1) <= tol2) | (_point_seg_dist2(b1, a0, a1) <= tol2)
            | (_point_seg_dist2(a0, b0, b1) <= tol2) | (_point_seg_dist2(a1, b0, b1) <= tol2))
    return proper | near


def cross_section(model: SurfaceModel, origin, normal, radius):
    """Segments where the plane ``(p - origin) . normal = 0`` cuts the surface.

    Only triangles that may come within ``radius`` of ``origin`` are
    considered.  Returns two ``(k, 3)`` arrays of segment endpoints.
    """
    near = np.linalg.norm(model.centroids - origin, axis=1) - model.radii <= radius
    idx = np.nonzero(near)[0]
    if len(idx) == 0:
        return np.empty((0, 3)), np.empty((0, 3))
    C = model.corners[idx]
    s = (C - origin) @ normal
    on = np.abs(s) <= _PLANE_TOL
    straddle = (s.min(axis=1) <= _PLANE_TOL) & (s.max(axis=1) >= -_PLANE_TOL) & ~on.all(axis=1)
    if not straddle.any():
        return np.empty((0, 3)), np.empty((0, 3))
    C, s, on = C[straddle], s[straddle], on[straddle]
    pts = []
    valid = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        si, sj = s[:, i], s[:, j]
        cross = (si * sj < 0) & ~on[:, i] & ~on[:, j]
        t = np.where(cross, si / np.where(cross, si - sj, 1.0), 0.0)
        pts.append(C[:, i] + t[:, None] * (C[:, j] - C[:, i]))
        valid.append(cross)
    for i in range(3):
        pts.append(C[:, i])
        valid.append(on[:, i])
    pts = np.stack(pts, axis=1)
    valid = np.stack(valid, axis=1)
    first = np.argmax(valid, axis=1)
    last = valid.shape[1] - 1 - np.argmax(valid[:, ::-1], axis=1)
    rows = np.arange(len(C))
    return pts[rows, first], pts[rows, last]


def free_angles(model: SurfaceModel, contact, frame, angles, l_f,
                clearance=FINGER_CLEARANCE, width=0.0) -> np.ndarray:
    """Boolean mask over ``angles`` (rad): True where the finger is collision free."""
    R = check_frame(frame)
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if l_f <= 0:
        return np.ones(len(angles), dtype=bool)
    x, y, z = R
    q = np.asarray(contact, dtype=float) + clearance * x
    if model.contains(q):
        return np.zeros(len(angles), dtype=bool)
    reach = float(np.hypot(l_f, 0.5 * width))
    s0, s1 = cross_section(model, q, x, reach)
    if len(s0) == 0:
        return np.ones(len(angles), dtype=bool)
    basis = np.stack([y, z], axis=1)
    b0 = ((s0 - q) @ basis)[None, :, :]
    b1 = ((s1 - q) @ basis)[None, :, :]
    d = np.column_stack([np.cos(angles), np.sin(angles)])
    if width <= 0:
        a0 = np.zeros((len(angles), 1, 2))
        a1 = (l_f * d)[:, None, :]
        hit = segments_intersect_2d(a0, a1, b0, b1).any(axis=1)
        return ~hit
    nrm = np.column_stack([-d[:, 1], d[:, 0]]) * (0.5 * width)
    corners = np.stack([-nrm, l_f * d - nrm, l_f * d + nrm, nrm], axis=1)  # (A, 4, 2)
    hit = np.zeros(len(angles), dtype=bool)
    for k in range(4):
        e0 = corners[:, k][:, None, :]
        e1 = corners[:, (k + 1) % 4][:, None, :]
        hit |= segments_intersect_2d(e0, e1, b0, b1).any(axis=1)
    # a section segment lying wholly inside the rectangle touches no edge
    u = np.einsum("bk,ak->ab", b0[0], d)
    v = np.einsum("bk,ak->ab", b0[0], nrm) / (0.25 * width * width)
    inside = (u >= 0) & (u <= l_f) & (np.abs(v) <= 1.0)
    return ~(hit | inside.any(axis=1))


def finger_collides(model: SurfaceModel, contact, frame, phi, l_f,
                    clearance=FINGER_CLEARANCE, width=0.0) -> bool:
    """True iff the finger at angle ``phi`` intersects the object volume."""
    return not bool(free_angles(model, contact, frame, [phi], l_f, clearance, width)[0])
