"""Graph data types, lookup, audit and JSON persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import NoAngularComponent, NoNode
from .angles import AngularComponent, circular_runs, snap, steps_per_turn

SCHEMA_VERSION = 1


def frame_from_normal(normal) -> np.ndarray:
    """Right-handed frame with rows (x, y, z) and x along ``normal``.

    y is the global axis least aligned with x, made orthogonal to it; ties
    between axes go to x, then y, then z.
    """
    x = np.asarray(normal, dtype=float)
    x = x / np.linalg.norm(x)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(x)))] = 1.0
    y = e - (e @ x) * x
    y /= np.linalg.norm(y)
    z = np.cross(x, y)
    return np.array([x, y, z])


@dataclass(frozen=True)
class ComponentFrame:
    component_id: int
    matrix: np.ndarray = field(repr=False)

    @property
    def x(self):
        return self.matrix[0]

    @property
    def y(self):
        return self.matrix[1]

    @property
    def z(self):
        return self.matrix[2]

    def direction(self, angle_rad: float) -> np.ndarray:
        """World direction of a finger at ``angle_rad`` in this frame's yz plane."""
        return math.cos(angle_rad) * self.matrix[1] + math.sin(angle_rad) * self.matrix[2]

    def angle_of(self, direction) -> float:
        """Angle in [0, 2pi) of the projection of ``direction`` onto the yz plane."""
        d = np.asarray(direction, dtype=float)
        return math.atan2(float(d @ self.matrix[2]), float(d @ self.matrix[1])) % (2 * math.pi)


@dataclass(frozen=True, eq=False)
class DMGNode:
    node_id: int
    patch_id: int
    centroid: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)
    angular_component: AngularComponent
    component_id: int


@dataclass(frozen=True)
class Component:
    component_id: int
    node_ids: tuple
    frame: ComponentFrame


class NodeMatch(NamedTuple):
    node: DMGNode
    step: int

    @property
    def angle(self) -> float:
        return math.radians(self.step * self.node.angular_component.r_angle)


class DMG:
    """Immutable Dexterous Manipulation Graph.

    ``edges`` maps each node id to ``{neighbor_id: centroid distance}``.
    ``patch_centroids``/``triangle_patch`` keep the segmentation needed to map
    surface points and ray hits back to nodes.  ``free_steps`` records each
    surviving patch's collision-free set before splitting.
    """

    def __init__(self, nodes, edges, components, params, patch_centroids, patch_normals,
                 triangle_patch, free_steps, timings=None, source=None):
        self.nodes: dict[int, DMGNode] = dict(nodes)
        self.edges: dict[int, dict[int, float]] = {k: dict(v) for k, v in edges.items()}
        for nid in self.nodes:
            self.edges.setdefault(nid, {})
        self.components: dict[int, Component] = dict(components)
        self.params = dict(params)
        self.patch_centroids = np.asarray(patch_centroids, dtype=float)
        self.patch_normals = np.asarray(patch_normals, dtype=float)
        self.triangle_patch = np.asarray(triangle_patch, dtype=np.int64)
        self.free_steps = {int(k): frozenset(v) for k, v in free_steps.items()}
        self.timings = dict(timings or {})
        self.source = dict(source or {})
        for arr in (self.patch_centroids, self.patch_normals, self.triangle_patch):
            arr.flags.writeable = False
        self.patch_nodes: dict[int, list[int]] = {}
        for nid in sorted(self.nodes):
            self.patch_nodes.setdefault(self.nodes[nid].patch_id, []).append(nid)
        self._tree = cKDTree(self.patch_centroids)

    # basic accessors --------------------------------------------------------------
    @property
    def r_angle(self) -> float:
        return float(self.params["r_angle"])

    @property
    def r_area(self) -> float:
        return float(self.params["r_area"])

    @property
    def K(self) -> int:
        return steps_per_turn(self.r_angle)

    def node(self, nid: int) -> DMGNode:
        return self.nodes[nid]

    def neighbors(self, nid: int) -> dict[int, float]:
        return self.edges[nid]

    def frame(self, component_id: int) -> ComponentFrame:
        return self.components[component_id].frame

    def frame_of(self, nid: int) -> ComponentFrame:
        return self.components[self.nodes[nid].component_id].frame

    def edge_list(self):
        """Undirected edges ``(a, b, cost)`` with ``a < b``, sorted."""
        return sorted((a, b, c) for a, nb in self.edges.items() for b, c in nb.items() if a < b)

    @property
    def num_edges(self) -> int:
        return sum(len(v) for v in self.edges.values()) // 2

    def nodes_of_patch(self, patch_id: int) -> list[int]:
        return self.patch_nodes.get(int(patch_id), [])

    def summary(self) -> dict:
        return {"nodes": len(self.nodes), "edges": self.num_edges,
                "components": len(self.components), "patches": len(self.patch_centroids),
                "timings": dict(self.timings)}

    # lookup -----------------------------------------------------------------------
    def nearest_patch(self, point) -> tuple[int, float]:
        d, i = self._tree.query(np.asarray(point, dtype=float))
        return int(i), float(d)

    def lookup(self, contact, orientation, component_id=None) -> NodeMatch:
        return node_lookup(self, contact, orientation, component_id)

    # persistence ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "dmg",
            "params": self.params,
            "source": self.source,
            "timings": self.timings,
            "patches": {"centroids": self.patch_centroids.tolist(),
                        "normals": self.patch_normals.tolist()},
            "triangle_patch": self.triangle_patch.tolist(),
            "free_steps": {str(k): sorted(v) for k, v in sorted(self.free_steps.items())},
            "nodes": [{"id": n.node_id, "patch": n.patch_id, "centroid": n.centroid.tolist(),
                       "normal": n.normal.tolist(),
                       "steps": sorted(n.angular_component.steps),
                       "component": n.component_id} for _, n in sorted(self.nodes.items())],
            "edges": [[a, b, c] for a, b, c in self.edge_list()],
            "components": [{"id": c.component_id, "nodes": list(c.node_ids),
                            "frame": c.frame.matrix.tolist()}
                           for _, c in sorted(self.components.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DMG":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION or data.get("kind", "dmg") != "dmg":
            raise ValueError(f"unsupported DMG file (schema_version={version!r})")
        r_angle = float(data["params"]["r_angle"])
        nodes = {}
        for rec in data["nodes"]:
            nodes[int(rec["id"])] = DMGNode(
                int(rec["id"]), int(rec["patch"]), _ro(rec["centroid"]), _ro(rec["normal"]),
                AngularComponent(frozenset(rec["steps"]), r_angle), int(rec["component"]))
        edges: dict[int, dict[int, float]] = {k: {} for k in nodes}
        for a, b, c in data["edges"]:
            edges[int(a)][int(b)] = float(c)
            edges[int(b)][int(a)] = float(c)
        comps = {int(c["id"]): Component(int(c["id"]), tuple(int(x) for x in c["nodes"]),
                                         ComponentFrame(int(c["id"]), _ro(c["frame"])))
                 for c in data["components"]}
        return cls(nodes, edges, comps, data["params"], data["patches"]["centroids"],
                   data["patches"]["normals"], data["triangle_patch"],
                   {int(k): v for k, v in data["free_steps"].items()},
                   data.get("timings"), data.get("source"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DMG":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _ro(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.flags.writeable = False
    return a


def node_lookup(dmg: DMG, contact, orientation, component_id=None) -> NodeMatch:
    """Map a fingertip contact and orientation onto a node and a discrete angle.

    ``orientation`` is either an angle in radians in the component frame or a
    world finger direction (3-vector), which is projected onto the frame's yz
    plane.  The contact maps to the patch with the nearest centroid.  When
    ``component_id`` is given only that component's nodes are eligible.
    """
    pid, dist = dmg.nearest_patch(contact)
    if dist > dmg.r_area:
        raise NoNode(f"no patch centroid within r_area of {np.asarray(contact).tolist()}")
    candidates = [n for n in dmg.nodes_of_patch(pid)
                  if component_id is None or dmg.nodes[n].component_id == component_id]
    if not candidates:
        raise NoNode(f"patch {pid} carries no DMG node")
    ori = np.asarray(orientation, dtype=float)
    for nid in candidates:
        node = dmg.nodes[nid]
        frame = dmg.frame(node.component_id)
        phi = frame.angle_of(ori) if ori.ndim == 1 and ori.size == 3 else float(ori)
        step = snap(phi, dmg.r_angle)
        if step in node.angular_component:
            return NodeMatch(node, step)
    raise NoAngularComponent(f"angle not admissible at patch {pid}")


def audit(dmg: DMG) -> list[str]:
    """Re-check every structural invariant; returns the list of violations."""
    problems = []
    delta_n = float(dmg.params["delta_n"])
    K = dmg.K
    for a, b, cost in dmg.edge_list():
        na, nb = dmg.nodes[a], dmg.nodes[b]
        if np.linalg.norm(na.normal - nb.normal) > delta_n:
            problems.append(f"edge {a}-{b} crosses a sharp edge")
        if not (na.angular_component.steps & nb.angular_component.steps):
            problems.append(f"edge {a}-{b} has no common orientation")
        if na.component_id != nb.component_id:
            problems.append(f"edge {a}-{b} joins components")
        if na.patch_id == nb.patch_id:
            problems.append(f"edge {a}-{b} joins sibling nodes")
        if abs(cost - float(np.linalg.norm(na.centroid - nb.centroid))) > 1e-12:
            problems.append(f"edge {a}-{b} cost is not the centroid distance")
        if dmg.edges[b].get(a) != cost:
            problems.append(f"edge {a}-{b} is not symmetric")
    for nid, node in dmg.nodes.items():
        steps = node.angular_component.steps
        if not steps:
            problems.append(f"node {nid} has an empty angular component")
        elif any(not 0 <= s < K for s in steps) or len(circular_runs(steps, K)) != 1:
            problems.append(f"node {nid} angular component is not one contiguous run")
    for pid, nids in dmg.patch_nodes.items():
        sets = [dmg.nodes[n].angular_component.steps for n in nids]
        union = frozenset().union(*sets)
        if sum(len(s) for s in sets) != len(union):
            problems.append(f"patch {pid} sibling components overlap")
        if union != dmg.free_steps.get(pid):
            problems.append(f"patch {pid} siblings do not cover its free orientations")
    seen = set()
    for cid, comp in dmg.components.items():
        R = comp.frame.matrix
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
            problems.append(f"component {cid} frame is not right-handed orthonormal")
        for nid in comp.node_ids:
            if dmg.nodes[nid].component_id != cid:
                problems.append(f"node {nid} listed in the wrong component")
            seen.add(nid)
    if seen != set(dmg.nodes):
        problems.append("components do not partition the nodes")
    return problems
