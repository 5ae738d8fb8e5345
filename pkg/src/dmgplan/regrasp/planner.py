"""Dual-gripper regrasp planning on top of the in-hand planner.

All grasps are expressed on the object, so a configuration means the same
thing whichever gripper holds it.  Grasps emitted here are canonical: contact
points at node centroids and orientations on the angle grid.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..dmg.angles import snap
from ..dmg.graph import DMG
from ..errors import (InfeasibleTransition, NoOpposition, NoPath, NoRegrasp, NoRelease,
                      NoSupportGrasp, PlanInfeasible)
from ..geometry.mesh import SurfaceModel
from ..geometry.raycast import point_segment_distance
from ..inhand.search import (ResolvedGrasp, grasp_at, opposite_finger_candidates,
                             resolve_grasp)
from ..inhand.sequence import InHandPlan, plan_in_hand
from ..inhand.types import CostOptions, GraspConfig
from .antipodal import (AntipodalPair, antipodal_candidates, antipodal_pair, approach_clear,
                        compatible_steps, grasp_from_pair, segment_distance)
from .plan import ManipulationPlan, Phase

GRIPPER_RADIUS = 0.01


@dataclass(frozen=True)
class RegraspOptions:
    """Gripper and scoring parameters for :func:`dmg_search`.

    ``d_max`` is the widest gripper opening (m).  ``eps_sep`` is the minimum
    distance between the two grippers' grasp lines while both hold the object.
    ``prefer_first``/``prefer_second`` are optional model-frame directions the
    respective finger should point towards.
    """

    d_max: float = 0.08
    delta_c: float = 0.4
    zeta: float = 1.0
    eps_sep: float = 1.5 * GRIPPER_RADIUS
    cost: CostOptions = field(default_factory=CostOptions)
    inhand_only: bool = False
    gripper_agnostic: bool = False
    prefer_first: tuple | None = None
    prefer_second: tuple | None = None


def canonical(dmg: DMG, grasp, gripper_id: int | None = None) -> GraspConfig:
    """Snap a grasp onto its DMG nodes and the angle grid."""
    r = grasp if isinstance(grasp, ResolvedGrasp) else resolve_grasp(dmg, grasp)
    gid = gripper_id if gripper_id is not None else getattr(grasp, "gripper_id", 1)
    return grasp_at(dmg, r.n1, r.k1, r.n2, gid)


def opposing_grasp(dmg: DMG, model: SurfaceModel, n1: int, k1: int, gripper_id: int = 1,
                   component: int | None = None) -> GraspConfig:
    """Grasp whose secondary finger sits where the principal's inward ray leaves the object.

    Raises :class:`NoOpposition` when no opposing node admits ``k1``.
    """
    for cand in opposite_finger_candidates(dmg, model, n1):
        n2 = cand.node_id
        if component is not None and dmg.nodes[n2].component_id != component:
            continue
        if k1 in compatible_steps(dmg, n1, n2):
            return grasp_at(dmg, n1, k1, n2, gripper_id)
    raise NoOpposition(f"no opposing node admits step {k1} at node {n1}")


def grasp_separation(a: GraspConfig, b: GraspConfig) -> float:
    """Distance between the two grasp lines (fingertip segments)."""
    return segment_distance(*a.grasp_line, *b.grasp_line)


def can_open(dmg: DMG, model: SurfaceModel, grasp: GraspConfig) -> bool:
    """Both fingers can back off along their contact normals."""
    for f in (grasp.principal, grasp.secondary):
        node = dmg.nodes[f.node_id]
        if not approach_clear(model, node.centroid, node.normal):
            return False
    return True


def line_distance(point, grasp: GraspConfig) -> float:
    return point_segment_distance(np.asarray(point, dtype=float), *grasp.grasp_line)


def support_score(points, current: GraspConfig, planned: GraspConfig, zeta: float) -> float:
    """Score of a support grasp with contacts ``points``: ``max(0, d_sum - zeta * d_diff)``.

    ``d_grasp``/``d_regrasp`` are the distances from the nearer contact to the
    current and planned grasp lines.
    """
    dg = min(line_distance(p, current) for p in points)
    dr = min(line_distance(p, planned) for p in points)
    return max(0.0, (dg + dr) - zeta * abs(dg - dr))


class _Pairs:
    """Lazily computed antipodal pair per anchor patch."""

    def __init__(self, dmg, model, d_max, delta_c):
        self.dmg, self.model, self.d_max, self.delta_c = dmg, model, d_max, delta_c
        self._cache: dict = {}

    def __call__(self, patch):
        if patch not in self._cache:
            self._cache[patch] = antipodal_pair(self.dmg, self.model, patch, self.d_max,
                                                self.delta_c)
        return self._cache[patch]


def _try_in_hand(dmg, model, a, b, opts) -> InHandPlan | None | bool:
    """In-hand plan from ``a`` to ``b``; None when they coincide, False when impossible."""
    if _same_grasp(a, b):
        return None
    try:
        return plan_in_hand(dmg, model, a, b, opts)
    except (NoPath, InfeasibleTransition):
        return False


def _same_grasp(a: GraspConfig, b: GraspConfig) -> bool:
    return (a.principal.node_id == b.principal.node_id
            and a.secondary.node_id == b.secondary.node_id
            and math.isclose(a.principal.angle, b.principal.angle, abs_tol=1e-9))


def direct_regrasp_ok(dmg: DMG, model: SurfaceModel, grasp: GraspConfig, d_max: float,
                      delta_c: float) -> bool:
    """The gripper can close straight onto ``grasp``."""
    n1, n2 = grasp.principal.node_id, grasp.secondary.node_id
    pair = antipodal_pair(dmg, model, dmg.nodes[n1].patch_id, d_max, delta_c)
    if pair is None or pair.patch2 != dmg.nodes[n2].patch_id:
        return False
    k1 = snap(grasp.principal.angle, dmg.r_angle)
    return k1 in compatible_steps(dmg, n1, n2)


def bfs_nodes(dmg: DMG, root: int):
    """Nodes of ``root``'s component, breadth first from ``root`` (neighbors by id)."""
    comp = dmg.nodes[root].component_id
    seen = {root}
    queue = deque([root])
    while queue:
        n = queue.popleft()
        yield n
        for m in sorted(dmg.neighbors(n)):
            if m not in seen and dmg.nodes[m].component_id == comp:
                seen.add(m)
                queue.append(m)


def plan_first_gripper_regrasp(dmg: DMG, model: SurfaceModel, desired: GraspConfig,
                               d_max: float = 0.08, delta_c: float = 0.4,
                               opts: CostOptions = CostOptions(), prefer_direction=None,
                               exclude=None):
    """Where the first gripper should regrasp so it can reach ``desired``.

    Returns ``(grasp, plan)`` where ``plan`` is the in-hand plan from the
    grasp to ``desired`` (None for a direct regrasp).  ``exclude(grasp)`` may
    reject candidates; it is used when the regrasp must move away from the
    support gripper.
    """
    d = canonical(dmg, desired, 1)
    if direct_regrasp_ok(dmg, model, d, d_max, delta_c) and not (exclude and exclude(d)):
        return d, None
    cd1 = dmg.nodes[d.principal.node_id].component_id
    cd2 = dmg.nodes[d.secondary.node_id].component_id
    k_d1 = snap(d.principal.angle, dmg.r_angle)
    pairs = _Pairs(dmg, model, d_max, delta_c)
    for n in bfs_nodes(dmg, d.principal.node_id):
        pair = pairs(dmg.nodes[n].patch_id)
        if pair is None:
            continue
        g = grasp_from_pair(dmg, pair, (cd1, cd2), k_d1, prefer_direction, 1, principal_node=n)
        if g is None or (exclude and exclude(g)):
            continue
        plan = _try_in_hand(dmg, model, g, d, opts)
        if plan is False:
            continue
        return g, plan
    raise NoRegrasp("no reachable antipodal grasp in the goal components")


@dataclass(frozen=True, eq=False)
class SupportPlan:
    """Second-gripper grasp and release, plus the first regrasp it may have moved."""

    grasp: GraspConfig
    release: GraspConfig
    inhand: InHandPlan | None
    first_grasp: GraspConfig
    first_inhand: InHandPlan | None
    branch: str
    score: float


def score_support_candidates(dmg: DMG, model: SurfaceModel, current: GraspConfig,
                             planned_first: GraspConfig, zeta: float = 1.0, d_max: float = 0.08,
                             delta_c: float = 0.4, prefer_direction=None):
    """Every support grasp with its score, best first (ties by principal node)."""
    out = []
    for pair in antipodal_candidates(dmg, model, None, d_max, delta_c):
        g = grasp_from_pair(dmg, pair, prefer_direction=prefer_direction, gripper_id=2)
        if g is not None:
            out.append((support_score(g.grasp_line, current, planned_first, zeta), g))
    out.sort(key=lambda sg: (-sg[0], sg[1].principal.node_id))
    return out


def plan_second_gripper_grasp(dmg: DMG, model: SurfaceModel, current: GraspConfig,
                              planned_first: GraspConfig, zeta: float = 1.0,
                              d_max: float = 0.08, delta_c: float = 0.4,
                              eps_sep: float = 1.5 * GRIPPER_RADIUS,
                              opts: CostOptions = CostOptions(), desired: GraspConfig | None = None,
                              first_inhand: InHandPlan | None = None,
                              prefer_direction=None) -> SupportPlan:
    """Support grasp for the second gripper.

    The pair with the best score is taken when it scores above zero and stays
    ``eps_sep`` away from the planned first regrasp.  Otherwise the support
    is chosen far from the current grasp alone, the first regrasp is moved
    away from it (which needs ``desired``), and as a last resort the support
    gripper slides to a release grasp clear of the first regrasp.
    """
    grasps = score_support_candidates(dmg, model, current, planned_first, zeta, d_max, delta_c,
                                      prefer_direction)
    if not grasps:
        raise NoSupportGrasp("the object offers no antipodal grasp for the support gripper")
    best_score, best = grasps[0]
    if best_score > 0 and grasp_separation(best, planned_first) >= eps_sep:
        return SupportPlan(best, best, None, planned_first, first_inhand, "scored", best_score)

    # far from the current grasp only
    far = max(grasps, key=lambda sg: grasp_separation(sg[1], current))[1]
    score = support_score(far.grasp_line, current, planned_first, zeta)
    if desired is not None:
        try:
            g1, s1 = plan_first_gripper_regrasp(
                dmg, model, desired, d_max, delta_c, opts,
                exclude=lambda g: grasp_separation(g, far) < eps_sep)
            return SupportPlan(far, far, None, g1, s1, "revised_first", score)
        except NoRegrasp:
            pass
    if grasp_separation(far, planned_first) >= eps_sep:
        return SupportPlan(far, far, None, planned_first, first_inhand, "far_from_current", score)

    # slide the support gripper away from the first regrasp before it closes
    c1 = dmg.nodes[far.principal.node_id].component_id
    c2 = dmg.nodes[far.secondary.node_id].component_id
    k = snap(far.principal.angle, dmg.r_angle)
    options = []
    for _, g in grasps:
        g = _in_components(dmg, g, c1, c2, k, prefer_direction)
        if g is not None and grasp_separation(g, planned_first) >= eps_sep:
            options.append(g)
    options.sort(key=lambda g: -grasp_separation(g, planned_first))
    for rel in options:
        s2 = _try_in_hand(dmg, model, far, rel, opts)
        if s2 is not False:
            return SupportPlan(far, rel, s2, planned_first, first_inhand, "support_slide", score)
    raise NoSupportGrasp("support grasp cannot be kept clear of the first gripper regrasp")


def _in_components(dmg, g, c1, c2, reference, prefer_direction):
    """Re-express grasp ``g`` with its principal in ``c1`` and secondary in ``c2``, if possible."""
    for a, b in ((g.principal, g.secondary), (g.secondary, g.principal)):
        na = [n for n in dmg.nodes_of_patch(dmg.nodes[a.node_id].patch_id)
              if dmg.nodes[n].component_id == c1]
        nb = [n for n in dmg.nodes_of_patch(dmg.nodes[b.node_id].patch_id)
              if dmg.nodes[n].component_id == c2]
        if not na or not nb:
            continue
        pair = AntipodalPair(dmg.nodes[na[0]].patch_id, dmg.nodes[nb[0]].patch_id,
                             a.point, b.point, 0.0, tuple(na), tuple(nb))
        out = grasp_from_pair(dmg, pair, (c1, c2), reference, prefer_direction, g.gripper_id)
        if out is not None:
            return out
    return None


def plan_first_gripper_release(dmg: DMG, model: SurfaceModel, current: GraspConfig,
                               support_grasp: GraspConfig,
                               eps_sep: float = 1.5 * GRIPPER_RADIUS,
                               opts: CostOptions = CostOptions(), d_max: float = 0.08,
                               delta_c: float = 0.4):
    """Where the first gripper lets go: ``(release, plan)``, ``plan`` None if no slide is needed."""
    cur = canonical(dmg, current, 1)
    if grasp_separation(cur, support_grasp) >= eps_sep and can_open(dmg, model, cur):
        return cur, None
    c1 = dmg.nodes[cur.principal.node_id].component_id
    c2 = dmg.nodes[cur.secondary.node_id].component_id
    k = snap(cur.principal.angle, dmg.r_angle)
    options = []
    for pair in antipodal_candidates(dmg, model, (c1, c2), d_max, delta_c):
        g = grasp_from_pair(dmg, pair, (c1, c2), k, gripper_id=1)
        if g is None:
            continue
        sep = grasp_separation(g, support_grasp)
        if sep >= eps_sep:
            options.append((sep, g))
    options.sort(key=lambda sg: (-sg[0], sg[1].principal.node_id))
    for _, g in options:
        s0 = _try_in_hand(dmg, model, cur, g, opts)
        if s0 is not False:
            return g, s0
    raise NoRelease("the first gripper cannot move clear of the support grasp")


def _inhand_phase(name, gripper, before, after, plan, other=None):
    seq = plan.sequence if plan is not None else None
    o = 2 if gripper == 1 else 1
    return Phase(name, "inhand", gripper, {gripper: before, o: other}, {gripper: after, o: other},
                 seq)


def _frames(dmg: DMG, phases) -> dict:
    """Frames of every component a fingertip of the plan touches."""
    comps = set()
    for ph in phases:
        for holds in (ph.before, ph.after):
            for g in holds.values():
                if g is not None:
                    comps.update((g.principal.component_id, g.secondary.component_id))
    return {c: dmg.frame(c).matrix.copy() for c in sorted(comps)}


def dmg_search(dmg: DMG, model: SurfaceModel, start: GraspConfig, goal: GraspConfig,
               options: RegraspOptions = RegraspOptions()) -> ManipulationPlan:
    """Full plan from ``start`` to ``goal``: one in-hand motion, or a regrasp sequence."""
    try:
        s = canonical(dmg, start, 1)
        d = canonical(dmg, goal, 1)
    except Exception as exc:
        raise PlanInfeasible("lookup", str(exc)) from exc
    opts = options.cost
    direct = _try_in_hand(dmg, model, s, d, opts)
    if direct is not False:
        phases = [_inhand_phase("inhand", 1, s, d, direct)]
        return ManipulationPlan(s, d, phases, "inhand", {"final_gripper": 1}, _frames(dmg, phases))
    if options.inhand_only:
        raise PlanInfeasible("inhand", "no in-hand path and regrasping is disabled")
    if options.gripper_agnostic:
        return _agnostic_plan(dmg, model, s, d, options)

    try:
        g1, s1 = plan_first_gripper_regrasp(dmg, model, d, options.d_max, options.delta_c, opts,
                                            options.prefer_first)
    except NoRegrasp as exc:
        raise PlanInfeasible("first_regrasp", str(exc)) from exc
    try:
        sup = plan_second_gripper_grasp(dmg, model, s, g1, options.zeta, options.d_max,
                                        options.delta_c, options.eps_sep, opts, d, s1,
                                        options.prefer_second)
    except NoSupportGrasp as exc:
        raise PlanInfeasible("second_grasp", str(exc)) from exc
    g1, s1 = sup.first_grasp, sup.first_inhand
    try:
        r1, s0 = plan_first_gripper_release(dmg, model, s, sup.grasp, options.eps_sep, opts,
                                            options.d_max, options.delta_c)
    except NoRelease as exc:
        raise PlanInfeasible("first_release", str(exc)) from exc

    g2, r2 = sup.grasp, sup.release
    phases = [
        _inhand_phase("reach_first_release", 1, s, r1, s0),
        Phase("second_gripper_grasp", "grasp", 2, {1: r1, 2: None}, {1: r1, 2: g2}),
        Phase("first_gripper_release", "release", 1, {1: r1, 2: g2}, {1: None, 2: g2}),
        _inhand_phase("reach_second_release", 2, g2, r2, sup.inhand),
        Phase("first_gripper_grasp", "grasp", 1, {1: None, 2: r2}, {1: g1, 2: r2}),
        Phase("second_gripper_release", "release", 2, {1: g1, 2: r2}, {1: g1, 2: None}),
    ]
    if s1 is not None:
        phases.append(_inhand_phase("final_inhand", 1, g1, d, s1))
    info = {"final_gripper": 1, "support_branch": sup.branch, "support_score": sup.score}
    return ManipulationPlan(s, d, phases, "regrasp", info, _frames(dmg, phases))


def _agnostic_plan(dmg, model, s, d, options) -> ManipulationPlan:
    """Hand the object to the second gripper, which then finishes in-hand.

    Support grasps must sit in the goal's components; they are tried nearest
    the goal first among those clear of the current grasp.
    """
    opts = options.cost
    cd1 = dmg.nodes[d.principal.node_id].component_id
    cd2 = dmg.nodes[d.secondary.node_id].component_id
    k_d = snap(d.principal.angle, dmg.r_angle)
    goal2 = d.with_gripper(2)
    cands = []
    for pair in antipodal_candidates(dmg, model, (cd1, cd2), options.d_max, options.delta_c):
        g = grasp_from_pair(dmg, pair, (cd1, cd2), k_d, options.prefer_second, 2)
        if g is None:
            continue
        sep = grasp_separation(g, s)
        if sep >= options.eps_sep:
            gap = float(np.linalg.norm(np.subtract(g.principal.point, d.principal.point)))
            cands.append((gap, -sep, g))
    cands.sort(key=lambda c: (c[0], c[1], c[2].principal.node_id))
    for _, _, g in cands:
        tail = _try_in_hand(dmg, model, g, goal2, opts)
        if tail is False:
            continue
        try:
            r1, s0 = plan_first_gripper_release(dmg, model, s, g, options.eps_sep, opts,
                                                options.d_max, options.delta_c)
        except NoRelease:
            continue
        phases = [
            _inhand_phase("reach_first_release", 1, s, r1, s0),
            Phase("second_gripper_grasp", "grasp", 2, {1: r1, 2: None}, {1: r1, 2: g}),
            Phase("first_gripper_release", "release", 1, {1: r1, 2: g}, {1: None, 2: g}),
        ]
        if tail is not None:
            phases.append(_inhand_phase("final_inhand", 2, g, goal2, tail))
        return ManipulationPlan(s, goal2, phases, "handover", {"final_gripper": 2},
                                _frames(dmg, phases))
    raise PlanInfeasible("second_grasp", "no support grasp in the goal components reaches the goal")
