"""Graph generation: refine the patch adjacency graph into a DMG.

The stages operate on a mutable :class:`GraphState` and mirror the order of
the generation loop: translation refinement, per-node collision-free angle
sets (with node removal and splitting), rotation refinement, and finally
component extraction.  Angles are integer steps of ``r_angle`` degrees.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateFrame, EmptyGraph
from ..geometry.finger import FINGER_CLEARANCE, free_angles
from ..geometry.mesh import SurfaceModel
from ..geometry.segment import PatchGraph, segment_surface
from .angles import AngularComponent, circular_runs, steps_per_turn
from .graph import DMG, Component, ComponentFrame, DMGNode, frame_from_normal

FRAME_EPS = 1e-6


@dataclass
class StateNode:
    patch_id: int
    centroid: np.ndarray
    normal: np.ndarray
    steps: frozenset | None = None  # None until the angular sweep has run
    frame: np.ndarray | None = None


@dataclass
class GraphState:
    """Mutable working graph; node ids are never reused."""

    nodes: dict = field(default_factory=dict)
    adj: dict = field(default_factory=dict)
    next_id: int = 0

    @classmethod
    def from_patches(cls, patch_graph: PatchGraph) -> "GraphState":
        st = cls()
        for pid in sorted(patch_graph.patches):
            p = patch_graph.patches[pid]
            st.nodes[pid] = StateNode(pid, np.asarray(p.centroid), np.asarray(p.normal))
            st.adj[pid] = set()
        for a, b in patch_graph.edges:
            st.adj[a].add(b)
            st.adj[b].add(a)
        st.next_id = max(st.nodes, default=-1) + 1
        return st

    def edges(self) -> set:
        return {(a, b) for a, nb in self.adj.items() for b in nb if a < b}

    def add_node(self, node: StateNode) -> int:
        nid = self.next_id
        self.next_id += 1
        self.nodes[nid] = node
        self.adj[nid] = set()
        return nid

    def remove_node(self, nid: int):
        for b in self.adj.pop(nid):
            self.adj[b].discard(nid)
        del self.nodes[nid]

    def remove_edge(self, a: int, b: int):
        self.adj[a].discard(b)
        self.adj[b].discard(a)

    def connected_sets(self) -> list[list[int]]:
        """Connected node sets via breadth-first search, ordered by smallest id."""
        seen, out = set(), []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp, queue = [], deque([start])
            seen.add(start)
            while queue:
                a = queue.popleft()
                comp.append(a)
                for b in sorted(self.adj[a]):
                    if b not in seen:
                        seen.add(b)
                        queue.append(b)
            out.append(sorted(comp))
        return out


def translation_refinement(state: GraphState, nid: int, delta_n: float) -> int:
    """Drop edges of ``nid`` whose normals differ by more than ``delta_n``; returns count."""
    n = state.nodes[nid].normal
    drop = [b for b in state.adj[nid] if np.linalg.norm(n - state.nodes[b].normal) > delta_n]
    for b in drop:
        state.remove_edge(nid, b)
    return len(drop)


def assign_frames(state: GraphState) -> dict[int, np.ndarray]:
    """Give every node the frame of its current connected set; returns frames by set."""
    frames = {}
    for k, comp in enumerate(state.connected_sets()):
        mean = np.mean([state.nodes[n].normal for n in comp], axis=0)
        if np.linalg.norm(mean) < FRAME_EPS:
            raise DegenerateFrame(f"mean normal vanishes on the component of node {comp[0]}")
        R = frame_from_normal(mean)
        frames[k] = R
        for n in comp:
            state.nodes[n].frame = R
    return frames


def angular_component(model: SurfaceModel, l_f: float, node: StateNode, r_angle: float,
                      clearance: float = FINGER_CLEARANCE, width: float = 0.0) -> frozenset:
    """Collision-free orientation steps of a finger touching at the node centroid."""
    K = steps_per_turn(r_angle)
    angles = np.radians(np.arange(K) * r_angle)
    ok = free_angles(model, node.centroid, node.frame, angles, l_f, clearance, width)
    return frozenset(int(k) for k in np.nonzero(ok)[0])


def split_node(state: GraphState, nid: int, steps, r_angle: float) -> list[int]:
    """Replace ``nid`` by one node per contiguous run of ``steps``.

    With a single run the node is kept and just receives the set.  New nodes
    inherit every neighbor of ``nid`` but are not linked to each other.
    """
    K = steps_per_turn(r_angle)
    runs = circular_runs(steps, K)
    if not runs:
        raise ValueError("cannot split on an empty angle set")
    old = state.nodes[nid]
    if len(runs) == 1:
        old.steps = frozenset(runs[0])
        return [nid]
    nbrs = sorted(state.adj[nid])
    state.remove_node(nid)
    out = []
    for run in runs:
        new = state.add_node(StateNode(old.patch_id, old.centroid, old.normal,
                                       frozenset(run), old.frame))
        for b in nbrs:
            state.adj[new].add(b)
            state.adj[b].add(new)
        out.append(new)
    return out


def rotation_refinement(state: GraphState, nid: int) -> int:
    """Drop edges of ``nid`` to nodes sharing no orientation; returns count."""
    s = state.nodes[nid].steps
    drop = [b for b in state.adj[nid] if not (s & state.nodes[b].steps)]
    for b in drop:
        state.remove_edge(nid, b)
    return len(drop)


def extract_components(state: GraphState, r_angle: float, params: dict, patch_graph: PatchGraph,
                       free_steps: dict, timings=None, source=None) -> DMG:
    """Freeze the refined state into a :class:`DMG` with renumbered ids.

    Final ids follow (patch id, first step of the run), so they do not depend
    on the order in which nodes were split.  Each component keeps the frame
    its nodes' angles were computed in.
    """
    if not state.nodes:
        raise EmptyGraph("every node was removed")
    order = sorted(state.nodes, key=lambda n: (state.nodes[n].patch_id,
                                               min(state.nodes[n].steps)))
    new_id = {old: k for k, old in enumerate(order)}
    sets = sorted(([new_id[n] for n in comp] for comp in state.connected_sets()), key=min)
    comp_of, components = {}, {}
    for cid, members in enumerate(sets):
        members = sorted(members)
        R = np.array(state.nodes[order[members[0]]].frame, dtype=float)
        R.flags.writeable = False
        components[cid] = Component(cid, tuple(members), ComponentFrame(cid, R))
        for m in members:
            comp_of[m] = cid
    nodes, edges = {}, {}
    for old, nid in new_id.items():
        sn = state.nodes[old]
        nodes[nid] = DMGNode(nid, sn.patch_id, sn.centroid, sn.normal,
                             AngularComponent(sn.steps, r_angle), comp_of[nid])
        edges[nid] = {}
    for a, b in state.edges():
        na, nb = new_id[a], new_id[b]
        cost = float(np.linalg.norm(state.nodes[a].centroid - state.nodes[b].centroid))
        edges[na][nb] = cost
        edges[nb][na] = cost
    P = len(patch_graph.patches)
    centroids = np.array([patch_graph.patches[p].centroid for p in range(P)])
    normals = np.array([patch_graph.patches[p].normal for p in range(P)])
    return DMG(nodes, edges, components, params, centroids, normals,
               patch_graph.triangle_patch, free_steps, timings, source)


def build_dmg(patch_graph: PatchGraph, model: SurfaceModel, l_f: float = 0.04,
              delta_n: float = 0.15, r_angle: float = 5.0, finger_width: float = 0.0,
              clearance: float = FINGER_CLEARANCE, timings=None, source=None) -> DMG:
    """Generate the DMG from a segmented surface."""
    if not delta_n > 0:
        raise ValueError("delta_n must be positive")
    if not l_f > 0:
        raise ValueError("l_f must be positive")
    steps_per_turn(r_angle)
    t0 = time.perf_counter()
    state = GraphState.from_patches(patch_graph)
    for nid in sorted(state.nodes):
        translation_refinement(state, nid, delta_n)
    assign_frames(state)

    free_steps = {}
    for nid in sorted(state.nodes):
        node = state.nodes[nid]
        steps = angular_component(model, l_f, node, r_angle, clearance, finger_width)
        if not steps:
            state.remove_node(nid)
            continue
        free_steps[node.patch_id] = steps
        split_node(state, nid, steps, r_angle)

    for nid in sorted(state.nodes):
        rotation_refinement(state, nid)

    params = {"l_f": float(l_f), "delta_n": float(delta_n), "r_angle": float(r_angle),
              "r_area": float(patch_graph.r_area), "finger_width": float(finger_width),
              "clearance": float(clearance)}
    timings = dict(timings or {})
    timings["refinement"] = time.perf_counter() - t0
    return extract_components(state, r_angle, params, patch_graph, free_steps, timings, source)


def generate_dmg(model: SurfaceModel, r_area: float = 0.01, r_angle: float = 5.0,
                 l_f: float = 0.04, delta_n: float = 0.15, seed_order: str = "scan",
                 finger_width: float = 0.0, source=None) -> DMG:
    """Segment ``model`` and build its DMG, timing both stages."""
    t0 = time.perf_counter()
    pg = segment_surface(model, r_area, seed_order=seed_order)
    timings = {"segmentation": time.perf_counter() - t0}
    dmg = build_dmg(pg, model, l_f, delta_n, r_angle, finger_width, timings=timings,
                    source=source)
    dmg.timings["total"] = dmg.timings["segmentation"] + dmg.timings["refinement"]
    return dmg
