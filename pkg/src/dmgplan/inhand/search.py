"""Shortest in-hand path for the principal finger, validated against the secondary.

The search runs Dijkstra over (node, orientation step) states of the start
component.  Sliding to a neighbor keeps the orientation; rotating in place
moves one step at a time and is charged ``w_rot`` per radian.  A neighbor can
be entered only if the ray through the object from its centroid (along the
inward normal) meets a node of the secondary finger's component whose
orientations, seen from the principal's frame, overlap the neighbor's; the
node's usable orientations are then narrowed to that overlap.
"""

from __future__ import annotations

import heapq
import math
import weakref
from dataclasses import dataclass

import numpy as np

from ..dmg.angles import circular_runs, snap, steps_per_turn
from ..dmg.graph import DMG, node_lookup
from ..errors import NoOpposition, NoPath
from ..geometry.mesh import SurfaceModel
from .types import CostOptions, FingerConfig, GraspConfig, InHandPath

_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class OppositeCandidate:
    node_id: int
    steps: frozenset  # orientations expressed in the principal's component frame
    point: tuple
    distance: float


def map_steps(dmg: DMG, steps, from_component: int, to_component: int) -> frozenset:
    """Express orientation steps of one component frame in another, snapped."""
    if from_component == to_component:
        return frozenset(steps)
    src = dmg.frame(from_component).matrix
    dst = dmg.frame(to_component).matrix
    s = np.array(sorted(steps), dtype=float)
    if len(s) == 0:
        return frozenset()
    ang = np.radians(s * dmg.r_angle)
    v = np.outer(np.cos(ang), src[1]) + np.outer(np.sin(ang), src[2])
    phi = np.arctan2(v @ dst[2], v @ dst[1])
    return frozenset(snap(a, dmg.r_angle) for a in phi)


def _hits(dmg: DMG, model: SurfaceModel, nid: int):
    per_model = _CACHE.setdefault(dmg, weakref.WeakKeyDictionary()).setdefault(model, {})
    if nid not in per_model:
        node = dmg.nodes[nid]
        per_model[nid] = model.raycast(node.centroid, -node.normal)
    return per_model[nid]


def opposite_finger_candidates(dmg: DMG, model: SurfaceModel, nid: int) -> list[OppositeCandidate]:
    """Nodes met by the ray from the node's centroid along its inward normal.

    Candidates are ordered by hit distance, then node id; every node of a hit
    patch is listed (split nodes yield several candidates for one hit).
    """
    hits = _hits(dmg, model, nid)
    if not hits:
        raise NoOpposition(f"ray from node {nid} leaves the object without a hit")
    c1 = dmg.nodes[nid].component_id
    out = []
    for h in hits:
        pid = int(dmg.triangle_patch[h.triangle])
        for n2 in dmg.nodes_of_patch(pid):
            node2 = dmg.nodes[n2]
            out.append(OppositeCandidate(
                n2, map_steps(dmg, node2.angular_component.steps, node2.component_id, c1),
                tuple(h.point), h.distance))
    return out


def secondary_validity(dmg: DMG, model: SurfaceModel, nid: int, c2: int,
                       normal_bound: float | None):
    """First opposite candidate in ``c2`` compatible with ``nid``.

    Returns ``(narrowed steps, secondary node id)`` or ``(None, None)``.
    """
    try:
        cands = opposite_finger_candidates(dmg, model, nid)
    except NoOpposition:
        return None, None
    node = dmg.nodes[nid]
    own = node.angular_component.steps
    for c in cands:
        other = dmg.nodes[c.node_id]
        if other.component_id != c2:
            continue
        if normal_bound is not None and np.linalg.norm(node.normal + other.normal) > normal_bound:
            continue
        common = own & c.steps
        if common:
            return frozenset(common), c.node_id
    return None, None


def edge_cost(dmg: DMG, j: int, i: int, step: int, allowed_j, allowed_i,
              opts: CostOptions = CostOptions()) -> tuple[float, int | None]:
    """Cost of sliding from ``j`` (finger at ``step``) into ``i``.

    Returns ``(cost, step used for the slide)``.  When ``step`` is not usable
    at ``i`` the finger first rotates at ``j`` to the nearest usable step
    reachable without leaving ``allowed_j``.  ``allowed_i`` None means ``i``
    has no valid secondary, giving an infinite cost.
    """
    if allowed_i is None:
        return math.inf, None
    K = dmg.K
    rot = _nearest_reachable(step, allowed_j, allowed_i, K)
    if rot is None:
        return math.inf, None
    arc, target = rot
    t = dmg.nodes[i].centroid - dmg.nodes[j].centroid
    cost = float(np.linalg.norm(t)) + opts.w_rot * math.radians(abs(arc) * dmg.r_angle)
    if opts.w_pull and _is_pull(dmg, j, target, t):
        cost += opts.w_pull
    return cost, target


def _nearest_reachable(step, allowed_from, targets, K):
    """Smallest signed rotation from ``step`` to a member of ``targets`` within one run."""
    if step in targets and step in allowed_from:
        return 0, step
    for run in circular_runs(allowed_from, K):
        if step not in run:
            continue
        pos = {s: k for k, s in enumerate(run)}
        full = len(run) == K
        best = None
        for s in run:
            if s not in targets:
                continue
            if full:
                d = (s - step) % K
                arc = d - K if d > K // 2 else d
            else:
                arc = pos[s] - pos[step]
            key = (abs(arc), -arc)
            if best is None or key < best[0]:
                best = (key, arc, s)
        return None if best is None else (best[1], best[2])
    return None


def _is_pull(dmg: DMG, nid: int, step: int, t) -> bool:
    d = dmg.frame_of(nid).direction(math.radians(step * dmg.r_angle))
    return float(np.dot(t, d)) > 1e-12


@dataclass(frozen=True)
class ResolvedGrasp:
    n1: int
    k1: int
    n2: int
    k2: int


def resolve_finger(dmg: DMG, finger: FingerConfig):
    if finger.node_id is not None:
        node = dmg.nodes[finger.node_id]
        return node.node_id, snap(finger.angle, dmg.r_angle)
    m = node_lookup(dmg, finger.point, finger.angle, finger.component_id)
    return m.node.node_id, m.step


def resolve_grasp(dmg: DMG, grasp: GraspConfig) -> ResolvedGrasp:
    n1, k1 = resolve_finger(dmg, grasp.principal)
    n2, k2 = resolve_finger(dmg, grasp.secondary)
    return ResolvedGrasp(n1, k1, n2, k2)


def finger_at(dmg: DMG, nid: int, step: int) -> FingerConfig:
    node = dmg.nodes[nid]
    return FingerConfig(node.centroid, math.radians(step * dmg.r_angle), node.component_id, nid)


def secondary_step(dmg: DMG, n1: int, k1: int, n2: int) -> int:
    """Orientation step of the opposing finger: same world direction, other frame."""
    (k2,) = map_steps(dmg, [k1], dmg.nodes[n1].component_id, dmg.nodes[n2].component_id)
    return k2


def grasp_at(dmg: DMG, n1: int, k1: int, n2: int, gripper_id: int = 1) -> GraspConfig:
    return GraspConfig(finger_at(dmg, n1, k1), finger_at(dmg, n2, secondary_step(dmg, n1, k1, n2)),
                       gripper_id)


def _terminal_set(dmg: DMG, n1: int, k1: int, n2: int) -> frozenset:
    """Orientations usable at a given grasp: the overlap with the opposing node if it holds ``k1``."""
    node1, node2 = dmg.nodes[n1], dmg.nodes[n2]
    own = node1.angular_component.steps
    both = own & map_steps(dmg, node2.angular_component.steps, node2.component_id,
                           node1.component_id)
    return frozenset(both) if k1 in both else frozenset(own)


def _arc_within(steps, a, b, K):
    for run in circular_runs(steps, K):
        if a in run and b in run:
            if len(run) == K:
                d = (b - a) % K
                return d - K if d > K // 2 else d
            return run.index(b) - run.index(a)
    return None


class InHandSearch:
    """Reusable search context: caches secondary validity for one secondary component."""

    def __init__(self, dmg: DMG, model: SurfaceModel, c2: int, opts: CostOptions = CostOptions()):
        self.dmg, self.model, self.c2, self.opts = dmg, model, c2, opts
        self.bound = opts.normal_bound(dmg)
        self._valid: dict = {}

    def validity(self, nid: int):
        if nid not in self._valid:
            self._valid[nid] = secondary_validity(self.dmg, self.model, nid, self.c2, self.bound)
        return self._valid[nid]

    def run(self, s: ResolvedGrasp, d: ResolvedGrasp) -> InHandPath:
        dmg, opts = self.dmg, self.opts
        K = dmg.K
        rot_cost = opts.w_rot * math.radians(dmg.r_angle)
        start_set = _terminal_set(dmg, s.n1, s.k1, s.n2)
        if s.k1 not in start_set:
            raise NoPath("start orientation is not admissible at the start node")
        goal_set = _terminal_set(dmg, d.n1, d.k1, d.n2)
        if d.k1 not in goal_set:
            raise NoPath("goal orientation is not admissible at the goal node")
        comp = dmg.nodes[s.n1].component_id

        def allowed(n):
            if n == s.n1:
                return start_set
            return self.validity(n)[0]

        GOAL = (-1, -1)
        dist = {(s.n1, s.k1): 0.0}
        prev: dict = {}
        heap = [(0.0, s.n1, s.k1, 0)]
        done = set()
        while heap:
            c, n, k, flag = heapq.heappop(heap)
            if flag:
                break
            state = (n, k)
            if state in done:
                continue
            done.add(state)
            here = allowed(n)
            if n == d.n1:
                arc = _arc_within(goal_set, k, d.k1, K)
                if arc is not None:
                    total = c + opts.w_rot * math.radians(abs(arc) * dmg.r_angle)
                    if total < dist.get(GOAL, math.inf):
                        dist[GOAL] = total
                        prev[GOAL] = state
                        heapq.heappush(heap, (total, -1, -1, 1))
            for dk in (1, -1):
                k2 = (k + dk) % K
                if k2 in here:
                    self._relax(dist, prev, heap, state, (n, k2), c + rot_cost)
            for i, w in dmg.edges[n].items():
                if dmg.nodes[i].component_id != comp:
                    continue
                ai = allowed(i)
                if ai is None or k not in ai:
                    continue
                step_cost = w
                if opts.w_pull and _is_pull(dmg, n, k, dmg.nodes[i].centroid - dmg.nodes[n].centroid):
                    step_cost += opts.w_pull
                self._relax(dist, prev, heap, state, (i, k), c + step_cost)
        if GOAL not in prev:
            raise NoPath("no valid in-hand path inside the start component")
        states = []
        st = prev[GOAL]
        while True:
            states.append(st)
            if st not in prev:
                break
            st = prev[st]
        states.reverse()
        nodes = [states[0][0]]
        for n, _ in states[1:]:
            if n != nodes[-1]:
                nodes.append(n)
        allowed_map = {n: allowed(n) for n in nodes}
        allowed_map[d.n1] = goal_set if d.n1 != s.n1 else start_set | goal_set
        secondary = {n: (s.n2 if n == s.n1 else d.n2 if n == d.n1 else self.validity(n)[1])
                     for n in nodes}
        return InHandPath(tuple(nodes), dist[GOAL], allowed_map, secondary, tuple(states),
                          s.k1, d.k1, (comp, self.c2))

    @staticmethod
    def _relax(dist, prev, heap, frm, to, cost):
        if cost < dist.get(to, math.inf):
            dist[to] = cost
            prev[to] = frm
            heapq.heappush(heap, (cost, to[0], to[1], 0))


def in_hand_search(dmg: DMG, model: SurfaceModel, start, goal,
                   opts: CostOptions = CostOptions()) -> InHandPath:
    """Plan the principal finger's node path from ``start`` to ``goal``.

    ``start``/``goal`` are :class:`GraspConfig` or already resolved grasps.
    Raises :class:`NoPath` when the two grasps are in different components or
    no valid path exists.
    """
    s = start if isinstance(start, ResolvedGrasp) else resolve_grasp(dmg, start)
    d = goal if isinstance(goal, ResolvedGrasp) else resolve_grasp(dmg, goal)
    cs1, cs2 = dmg.nodes[s.n1].component_id, dmg.nodes[s.n2].component_id
    cd1, cd2 = dmg.nodes[d.n1].component_id, dmg.nodes[d.n2].component_id
    if cs1 != cd1 or cs2 != cd2:
        raise NoPath("start and goal lie in different DMG components")
    return InHandSearch(dmg, model, cs2, opts).run(s, d)
