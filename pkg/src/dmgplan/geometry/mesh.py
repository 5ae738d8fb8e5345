"""Triangle surface models: loading, cleanup, orientation and spatial queries."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..errors import DegenerateGeometry, ParseError
from .raycast import RAY_EPS, TriangleBVH, closest_points_on_triangles

log = logging.getLogger(__name__)

_AREA_EPS = 1e-14
# direction for inside/outside parity tests; deliberately not axis aligned
_PARITY_DIR = np.array([0.5773421, 0.5774093, 0.5773999])
_PARITY_DIR /= np.linalg.norm(_PARITY_DIR)


@dataclass(frozen=True)
class RayHit:
    point: np.ndarray
    distance: float
    triangle: int
    patch_id: int | None = None


class SurfaceModel:
    """Closed triangle surface in meters with outward winding.

    Instances are treated as immutable; the arrays are flagged read-only.
    Use :func:`load_surface` or :meth:`from_arrays` to build one.
    """

    def __init__(self, vertices, triangles, units_scale=1.0):
        self.vertices = np.array(vertices, dtype=float)
        self.triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        self.units_scale = float(units_scale)
        v = self.vertices
        a, b, c = v[self.triangles[:, 0]], v[self.triangles[:, 1]], v[self.triangles[:, 2]]
        cross = np.cross(b - a, c - a)
        dbl = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * dbl
        self.normals = cross / np.where(dbl > 0, dbl, 1.0)[:, None]
        self.centroids = (a + b + c) / 3.0
        self.corners = np.stack([a, b, c], axis=1)
        self.radii = np.linalg.norm(self.corners - self.centroids[:, None], axis=2).max(axis=1)
        self.bounds = np.array([v.min(axis=0), v.max(axis=0)])
        self.spatial_index = TriangleBVH(a, b, c)
        self._centroid_tree = cKDTree(self.centroids)
        for arr in (self.vertices, self.triangles, self.areas, self.normals,
                    self.centroids, self.corners, self.radii, self.bounds):
            arr.flags.writeable = False

    # construction -----------------------------------------------------------------
    @classmethod
    def from_arrays(cls, vertices, faces, units_scale=1.0, orient=True):
        """Scale, clean and orient raw arrays.

        ``faces`` may contain polygons (lists of any length >= 3); they are fan
        triangulated.  Degenerate and duplicate triangles are dropped with a
        warning.  When ``orient`` is set, every closed shell is flipped so its
        signed volume is positive.
        """
        if units_scale <= 0:
            raise ValueError("units_scale must be positive")
        v = np.asarray(vertices, dtype=float).reshape(-1, 3) * units_scale
        tris = _triangulate(faces)
        if len(v) < 4:
            raise DegenerateGeometry("need at least 4 vertices")
        centered = v - v.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-12 * max(1.0, np.abs(centered).max())) < 3:
            raise DegenerateGeometry("all vertices are coplanar")
        if len(tris) and (tris.min() < 0 or tris.max() >= len(v)):
            raise ParseError("face index out of range")
        tris, dropped = _clean(v, tris)
        if dropped:
            warnings.warn(f"dropped {dropped} degenerate or duplicate triangles", stacklevel=2)
        if len(tris) == 0:
            raise DegenerateGeometry("no usable triangles")
        if orient:
            tris = _orient_shells(v, tris)
        return cls(v, tris, units_scale)

    # queries ----------------------------------------------------------------------
    @property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.bounds[1] - self.bounds[0]))

    def signed_volume(self) -> float:
        a, b, c = self.corners[:, 0], self.corners[:, 1], self.corners[:, 2]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def raycast(self, origin, direction, max_distance=np.inf, min_distance=RAY_EPS):
        """Crossings of the ray ``origin + s*direction``, sorted by distance ``s``."""
        d = np.asarray(direction, dtype=float)
        nd = np.linalg.norm(d)
        if nd == 0:
            raise ValueError("ray direction must be nonzero")
        d = d / nd
        t, tri = self.spatial_index.intersect(origin, d, max_distance, min_distance)
        o = np.asarray(origin, dtype=float)
        return [RayHit(o + s * d, float(s), int(k)) for s, k in zip(t, tri)]

    def segment_hits(self, p0, p1) -> int:
        """Number of surface crossings on the open segment ``p0 -> p1``."""
        p0 = np.asarray(p0, dtype=float)
        d = np.asarray(p1, dtype=float) - p0
        n = np.linalg.norm(d)
        if n == 0:
            return 0
        t, _ = self.spatial_index.intersect(p0, d / n, n, RAY_EPS)
        return len(t)

    def contains(self, point) -> bool:
        """Parity test: True if ``point`` is strictly inside the closed surface."""
        t, _ = self.spatial_index.intersect(point, _PARITY_DIR, np.inf, 0.0)
        return len(t) % 2 == 1

    def closest_point(self, point, candidates=None):
        """Closest surface point and its triangle index.

        ``candidates`` restricts the search to a subset of triangles.
        """
        p = np.asarray(point, dtype=float)
        if candidates is None:
            k = min(len(self.centroids), 32)
            _, idx = self._centroid_tree.query(p, k=k)
            idx = np.atleast_1d(idx)
            # widen the candidate set so the nearest centroid cannot hide a closer face
            reach = np.linalg.norm(self.centroids[idx] - p, axis=1).max()
            reach += float(np.linalg.norm(self.corners[idx] - self.centroids[idx][:, None],
                                          axis=2).max())
            idx = np.array(sorted(set(self._centroid_tree.query_ball_point(p, reach)) | set(idx)))
        else:
            idx = np.asarray(candidates, dtype=int)
        q, d2 = closest_points_on_triangles(p, *(self.corners[idx, j] for j in range(3)))
        i = int(np.argmin(d2))
        return q[i], int(idx[i])


def _triangulate(faces) -> np.ndarray:
    if isinstance(faces, np.ndarray) and faces.ndim == 2 and faces.shape[1] == 3:
        return faces.astype(np.int64)
    out = []
    for f in faces:
        f = [int(i) for i in f]
        if len(f) < 3:
            raise ParseError(f"face with {len(f)} vertices")
        for k in range(1, len(f) - 1):
            out.append((f[0], f[k], f[k + 1]))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def _clean(v, tris):
    a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    scale = max(float(np.ptp(v, axis=0).max()), 1e-12)
    distinct = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    ok = distinct & (area > _AREA_EPS * scale * scale)
    keep = np.nonzero(ok)[0]
    _, first = np.unique(np.sort(tris[keep], axis=1), axis=0, return_index=True)
    keep = keep[np.sort(first)]
    return tris[keep], len(tris) - len(keep)


def _orient_shells(v, tris):
    """Flip shells with negative signed volume; shells with no volume are rejected."""
    n = len(tris)
    rows = np.repeat(np.arange(n), 3)
    graph = coo_matrix((np.ones(3 * n), (rows, tris.ravel())), shape=(n, len(v))).tocsr()
    adjacency = graph @ graph.T
    ncomp, labels = connected_components(adjacency, directed=False)
    a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
    vol = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
    tris = tris.copy()
    scale = float(np.ptp(v, axis=0).max())
    for k in range(ncomp):
        members = labels == k
        shell_vol = vol[members].sum()
        if abs(shell_vol) <= 1e-12 * scale ** 3:
            raise DegenerateGeometry(f"shell {k} encloses no volume; cannot orient normals")
        if shell_vol < 0:
            tris[members] = tris[members][:, ::-1]
    return tris


# file formats ---------------------------------------------------------------------------
def load_surface(path, format=None, units_scale=1.0) -> SurfaceModel:
    """Read an OBJ or PLY file into a cleaned, oriented :class:`SurfaceModel`."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt == "OBJ":
        verts, faces = _read_obj(path)
    elif fmt == "PLY":
        verts, faces = _read_ply(path)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    model = SurfaceModel.from_arrays(verts, faces, units_scale=units_scale)
    log.info("loaded %s: %d vertices, %d triangles", path, len(model.vertices), len(model.triangles))
    return model


def _read_obj(path):
    verts, faces = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                    if len(verts[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif parts[0] == "f":
                    idx = []
                    for tok in parts[1:]:
                        i = int(tok.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    faces.append(idx)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not verts:
        raise ParseError(f"{path}: no vertices")
    return np.array(verts), faces


def _read_ply(path):
    from plyfile import PlyData

    try:
        ply = PlyData.read(str(path))
        vert = ply["vertex"]
        verts = np.column_stack([vert["x"], vert["y"], vert["z"]]).astype(float)
        face = ply["face"]
        prop = "vertex_indices" if "vertex_indices" in face.data.dtype.names else "vertex_index"
        faces = [list(f) for f in face[prop]]
    except Exception as exc:  # plyfile raises several unrelated types
        raise ParseError(f"{path}: {exc}") from exc
    return verts, faces


def write_obj(path, vertices, triangles):
    with open(path, "w", encoding="utf-8") as fh:
        for p in vertices:
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for t in triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def write_colored_ply(path, model: SurfaceModel, face_colors, binary=True):
    """Write ``model`` with one RGB color per triangle (``(n, 3)`` uint8)."""
    write_ply(path, model.vertices, model.triangles, face_colors, binary)


def write_ply(path, vertices, triangles, face_colors, binary=True):
    from plyfile import PlyData, PlyElement

    tris = np.asarray(triangles)
    colors = np.broadcast_to(np.asarray(face_colors, dtype=np.uint8).reshape(-1, 3),
                             (len(tris), 3))
    vert = np.array([tuple(p) for p in np.asarray(vertices)],
                    dtype=[("x", "f4"), ("y", "f4"), ("z", "f4")])
    face = np.empty(len(tris), dtype=[("vertex_indices", "i4", (3,)),
                                      ("red", "u1"), ("green", "u1"), ("blue", "u1")])
    face["vertex_indices"] = tris
    face["red"], face["green"], face["blue"] = colors[:, 0], colors[:, 1], colors[:, 2]
    PlyData([PlyElement.describe(vert, "vertex"), PlyElement.describe(face, "face")],
            text=not binary).write(str(path))


def palette(n: int, seed: int = 7) -> np.ndarray:
    """Deterministic, well separated RGB colors."""
    hues = (np.arange(n) * 0.618033988749895 + seed * 0.1) % 1.0
    out = np.empty((n, 3))
    for i, h in enumerate(hues):
        k = (np.array([5.0, 3.0, 1.0]) + h * 6.0) % 6.0
        out[i] = 0.92 - 0.7 * np.clip(np.minimum(k, 4.0 - k), 0.0, 1.0)
    return (out * 255).astype(np.uint8)
