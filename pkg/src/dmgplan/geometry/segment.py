"""Surface segmentation into roughly r_area-sized patches.

Seeds are placed by farthest-point sampling over the triangles, using a graph
distance on the triangle adjacency graph, until every triangle lies within
r_area of a seed.  Every triangle is then assigned to its nearest seed.  The
graph distance adds a normal-difference term to the centroid distance, the
way supervoxel clustering mixes spatial and normal features, so patches do
not straddle sharp creases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..errors import ResolutionTooCoarse
from .mesh import RayHit, SurfaceModel
from .raycast import closest_points_on_triangles


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    id: int
    centroid: np.ndarray
    normal: np.ndarray
    member_area: float
    neighbor_ids: frozenset
    triangles: np.ndarray = field(repr=False)
    seed_triangle: int = -1


@dataclass(frozen=True, eq=False)
class PatchGraph:
    patches: dict
    edges: frozenset
    triangle_patch: np.ndarray = field(repr=False)
    r_area: float = 0.0

    def __len__(self):
        return len(self.patches)

    def neighbors(self, pid):
        return self.patches[pid].neighbor_ids

    def patch_of_triangle(self, tri: int) -> int:
        return int(self.triangle_patch[tri])


def triangle_adjacency(model: SurfaceModel) -> np.ndarray:
    """Pairs ``(i, j)`` of triangles sharing an edge."""
    tris = model.triangles
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges.sort(axis=1)
    owner = np.tile(np.arange(len(tris)), 3)
    key = edges[:, 0] * (len(model.vertices) + 1) + edges[:, 1]
    order = np.argsort(key, kind="stable")
    key, owner = key[order], owner[order]
    same = key[1:] == key[:-1]
    pairs = np.column_stack([owner[:-1][same], owner[1:][same]])
    return pairs[pairs[:, 0] != pairs[:, 1]]


def _distance_graph(model, pairs, r_area, normal_weight):
    i, j = pairs[:, 0], pairs[:, 1]
    w = np.linalg.norm(model.centroids[i] - model.centroids[j], axis=1)
    w += normal_weight * r_area * np.linalg.norm(model.normals[i] - model.normals[j], axis=1)
    w = np.maximum(w, 1e-15)  # csgraph treats stored zeros as missing edges
    n = len(model.triangles)
    return coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                      shape=(n, n)).tocsr()


def segment_surface(model: SurfaceModel, r_area: float, seed_order: str = "scan",
                    normal_weight: float = 1.0) -> PatchGraph:
    """Partition ``model`` into patches of resolution ``r_area`` (meters).

    ``seed_order`` fixes the first seed and breaks ties between equally far
    triangles: ``"scan"`` ranks triangles lexicographically by centroid
    (independent of file order), ``"index"`` uses the triangle order.
    """
    if not r_area > 0 or r_area >= 0.5 * model.bbox_diagonal:
        raise ValueError(f"r_area={r_area} must be in (0, {0.5 * model.bbox_diagonal:.4g})")
    pairs = triangle_adjacency(model)
    graph = _distance_graph(model, pairs, r_area, normal_weight)
    n = len(model.triangles)

    if seed_order == "scan":
        c = np.round(model.centroids, 12)
        order = np.lexsort((c[:, 2], c[:, 1], c[:, 0]))
    elif seed_order == "index":
        order = np.arange(n)
    else:
        raise ValueError(f"unknown seed_order {seed_order!r}")

    # farthest-point seeding: stop once every triangle is within r_area of a seed
    seeds = [int(order[0])]
    nearest = dijkstra(graph, directed=False, indices=seeds[0])
    while True:
        k = int(order[np.argmax(nearest[order])])
        reach = nearest[k]
        if reach <= r_area:
            break
        seeds.append(k)
        np.minimum(nearest, dijkstra(graph, directed=False, indices=k, limit=reach), out=nearest)

    _, _, sources = dijkstra(graph, directed=False, indices=seeds, min_only=True,
                             return_predecessors=True)
    seed_to_patch = {s: k for k, s in enumerate(seeds)}
    labels = np.array([seed_to_patch[int(s)] for s in sources], dtype=np.int64)

    if len(seeds) < 4:
        raise ResolutionTooCoarse(f"only {len(seeds)} patches at r_area={r_area}")

    la, lb = labels[pairs[:, 0]], labels[pairs[:, 1]]
    cross = la != lb
    edge_arr = np.unique(np.sort(np.column_stack([la[cross], lb[cross]]), axis=1), axis=0)
    neighbors = {k: set() for k in range(len(seeds))}
    for a, b in edge_arr:
        neighbors[int(a)].add(int(b))
        neighbors[int(b)].add(int(a))

    order_by_label = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order_by_label], np.arange(len(seeds) + 1))
    patches = {}
    for k, seed in enumerate(seeds):
        members = order_by_label[bounds[k]:bounds[k + 1]]
        area = model.areas[members]
        total = float(area.sum())
        nsum = (model.normals[members] * area[:, None]).sum(axis=0)
        nlen = np.linalg.norm(nsum)
        normal = nsum / nlen if nlen > 1e-12 * total else model.normals[seed].copy()
        mean = (model.centroids[members] * area[:, None]).sum(axis=0) / total
        q, d2 = closest_points_on_triangles(mean, *(model.corners[members, j] for j in range(3)))
        centroid = q[int(np.argmin(d2))]
        for arr in (normal, centroid, members):
            arr.flags.writeable = False
        patches[k] = SurfacePatch(k, centroid, normal, total, frozenset(neighbors[k]),
                                  members, seed)
    labels.flags.writeable = False
    edges = frozenset((int(a), int(b)) for a, b in edge_arr)
    return PatchGraph(patches, edges, labels, float(r_area))


def ray_intersections(model: SurfaceModel, origin, direction, patch_graph: PatchGraph | None = None):
    """Ray hits as ``RayHit`` records sorted by distance, tagged with patch ids.

    Hits closer than ``RAY_EPS`` to the origin are dropped.
    """
    hits = model.raycast(origin, direction)
    if patch_graph is None:
        return hits
    return [RayHit(h.point, h.distance, h.triangle, patch_graph.patch_of_triangle(h.triangle))
            for h in hits]
