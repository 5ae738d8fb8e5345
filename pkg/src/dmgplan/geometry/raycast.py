"""Ray and segment queries against a triangle soup.

The acceleration structure is a two-level bounding volume hierarchy: triangles
are grouped into leaves by recursive median splits, and every query tests all
leaf boxes at once before running a vectorised Moller-Trumbore pass over the
surviving triangles.  For the mesh sizes this package deals with (a few
thousand to a few tens of thousands of triangles) this is faster in numpy than
a deep tree walked from Python.
"""

from __future__ import annotations

import numpy as np

RAY_EPS = 1e-6
"""Hits closer than this to the ray origin are dropped (self-hit suppression), m."""

HIT_MERGE_TOL = 1e-9
"""Hits at the same distance within this tolerance are one crossing (shared edges), m."""

_BARY_TOL = 1e-9


def _leaf_partition(centroids: np.ndarray, index: np.ndarray, leaf_size: int, out: list):
    if len(index) <= leaf_size:
        out.append(index)
        return
    pts = centroids[index]
    axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
    order = index[np.argsort(pts[:, axis], kind="stable")]
    half = len(order) // 2
    _leaf_partition(centroids, order[:half], leaf_size, out)
    _leaf_partition(centroids, order[half:], leaf_size, out)


class TriangleBVH:
    """Leaf-box index over triangles given by their corner arrays ``(n, 3)``."""

    def __init__(self, v0: np.ndarray, v1: np.ndarray, v2: np.ndarray, leaf_size: int = 32):
        self.v0 = np.ascontiguousarray(v0, dtype=float)
        self.e1 = np.ascontiguousarray(v1 - v0, dtype=float)
        self.e2 = np.ascontiguousarray(v2 - v0, dtype=float)
        self._det_scale = np.linalg.norm(self.e1, axis=1) * np.linalg.norm(self.e2, axis=1)
        centroids = (v0 + v1 + v2) / 3.0
        leaves: list[np.ndarray] = []
        _leaf_partition(centroids, np.arange(len(v0)), leaf_size, leaves)
        self.leaves = leaves
        corners = np.stack([v0, v1, v2], axis=1)
        pad = 1e-9 + 1e-9 * float(np.abs(corners).max(initial=0.0))
        self.lo = np.array([corners[l].reshape(-1, 3).min(axis=0) for l in leaves]) - pad
        self.hi = np.array([corners[l].reshape(-1, 3).max(axis=0) for l in leaves]) + pad

    def __len__(self):
        return len(self.v0)

    def _leaf_hits(self, origin, direction, max_t):
        lo = self.lo - origin
        hi = self.hi - origin
        tmin = np.full(len(lo), -np.inf)
        tmax = np.full(len(lo), np.inf)
        for k in range(3):
            dk = direction[k]
            if abs(dk) < 1e-300:
                outside = (lo[:, k] > 0.0) | (hi[:, k] < 0.0)
                tmin[outside] = np.inf
                continue
            a = lo[:, k] / dk
            b = hi[:, k] / dk
            tmin = np.maximum(tmin, np.minimum(a, b))
            tmax = np.minimum(tmax, np.maximum(a, b))
        return np.nonzero((tmin <= tmax) & (tmax >= 0.0) & (tmin <= max_t))[0]

    def candidates(self, origin, direction, max_t=np.inf) -> np.ndarray:
        hit = self._leaf_hits(np.asarray(origin, float), np.asarray(direction, float), max_t)
        if len(hit) == 0:
            return np.empty(0, dtype=int)
        return np.concatenate([self.leaves[i] for i in hit])

    def intersect(self, origin, direction, max_t=np.inf, min_t=RAY_EPS):
        """Return ``(t, tri)`` for all crossings with ``min_t < t <= max_t``.

        ``direction`` need not be normalised; ``t`` is measured in units of
        ``|direction|``.  Results are sorted by ``t`` and crossings through
        shared edges or vertices are reported once, on the lowest triangle index.
        """
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        idx = self.candidates(o, d, max_t)
        if len(idx) == 0:
            return np.empty(0), np.empty(0, dtype=int)
        e1 = self.e1[idx]
        e2 = self.e2[idx]
        pvec = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, pvec)
        ok = np.abs(det) > 1e-12 * self._det_scale[idx] * np.linalg.norm(d)
        if not ok.any():
            return np.empty(0), np.empty(0, dtype=int)
        idx, e1, e2, pvec, det = idx[ok], e1[ok], e2[ok], pvec[ok], det[ok]
        inv = 1.0 / det
        tvec = o - self.v0[idx]
        u = np.einsum("ij,ij->i", tvec, pvec) * inv
        qvec = np.cross(tvec, e1)
        v = (qvec @ d) * inv
        t = np.einsum("ij,ij->i", e2, qvec) * inv
        keep = (u >= -_BARY_TOL) & (v >= -_BARY_TOL) & (u + v <= 1.0 + _BARY_TOL)
        keep &= (t > min_t) & (t <= max_t)
        t, idx = t[keep], idx[keep]
        if len(t) == 0:
            return t, idx
        order = np.lexsort((idx, t))
        t, idx = t[order], idx[order]
        # one crossing per group of near-equal t, reported on its lowest triangle index
        out_t, out_i = [t[0]], [idx[0]]
        for ti, ii in zip(t[1:], idx[1:]):
            if ti - out_t[-1] <= HIT_MERGE_TOL:
                out_i[-1] = min(out_i[-1], ii)
            else:
                out_t.append(ti)
                out_i.append(ii)
        return np.array(out_t), np.array(out_i, dtype=int)


def closest_points_on_triangles(p, a, b, c):
    """Closest point to ``p`` on each triangle ``(a[i], b[i], c[i])``.

    Returns ``(points, squared_distances)``.
    """
    p = np.asarray(p, dtype=float)
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    nn_safe = np.where(nn > 0, nn, 1.0)
    ap = p - a
    # projection onto the supporting plane, kept when inside the triangle
    w = np.einsum("ij,ij->i", np.cross(ab, ap), n) / nn_safe
    v = np.einsum("ij,ij->i", np.cross(ap, ac), n) / nn_safe
    u = 1.0 - v - w
    inside = (u >= 0) & (v >= 0) & (w >= 0) & (nn > 0)
    best = a + v[:, None] * ab + w[:, None] * ac
    best_d = np.einsum("ij,ij->i", best - p, best - p)
    best_d = np.where(inside, best_d, np.inf)
    for s, e in ((a, b), (b, c), (c, a)):
        q, dq = _closest_on_segments(p, s, e)
        better = ~inside & (dq < best_d)
        best = np.where(better[:, None], q, best)
        best_d = np.where(better, dq, best_d)
    return best, best_d


def _closest_on_segments(p, s, e):
    se = e - s
    ll = np.einsum("ij,ij->i", se, se)
    t = np.einsum("ij,ij->i", p - s, se) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    q = s + t[:, None] * se
    return q, np.einsum("ij,ij->i", q - p, q - p)


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to segment ``ab``."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    ab = b - a
    ll = float(ab @ ab)
    if ll == 0.0:
        return float(np.linalg.norm(p - a))
    t = min(1.0, max(0.0, float((p - a) @ ab) / ll))
    return float(np.linalg.norm(p - (a + t * ab)))
