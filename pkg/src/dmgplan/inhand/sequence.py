"""From a node path to an executable rotation/translation sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dmg.angles import circular_runs, steps_per_turn, wrap_steps
from ..dmg.graph import DMG
from ..errors import InfeasibleTransition, NoPath
from ..geometry.mesh import SurfaceModel
from .search import in_hand_search, resolve_grasp
from .types import CostOptions, InHandPath, PrimitiveSequence

POLICIES = ("min_rotations", "stay_near_goal")


def _run_of(steps, k, K):
    for run in circular_runs(steps, K):
        if k in run:
            return run
    return ()


def _arc(steps, a, b, K):
    """Signed rotation from ``a`` to ``b`` inside the run of ``steps`` holding both."""
    run = _run_of(steps, a, K)
    if b not in run:
        return None
    if len(run) == K:
        return wrap_steps(b - a, K)
    return run.index(b) - run.index(a)


def _path_sets(path, dmg):
    if isinstance(path, InHandPath):
        return list(path.nodes), [frozenset(path.allowed[n]) for n in path.nodes]
    if dmg is None:
        raise ValueError("a DMG is needed to read angle sets from plain node lists")
    nodes = list(path)
    return nodes, [dmg.nodes[n].angular_component.steps for n in nodes]


def angle_sequence(path, phi_start: int, phi_goal: int, K: int, policy: str = "min_rotations",
                   dmg: DMG | None = None, sets=None) -> list[int]:
    """Orientation steps ``a_0 .. a_{n}`` for an ``n``-node path, plus the goal.

    ``a_0 = phi_start`` and the last entry is ``phi_goal``; entry ``k + 1``
    is the orientation used to slide from node ``k`` to node ``k + 1``.  The
    finger keeps its orientation whenever the next node admits it (under
    ``min_rotations``); otherwise it rotates, within node ``k``'s set, to a
    step shared with node ``k + 1``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if sets is None:
        _, sets = _path_sets(path, dmg)
    sets = [frozenset(s) for s in sets]
    n = len(sets)
    if phi_start not in sets[0]:
        raise InfeasibleTransition("start orientation not in the first node's set")
    if phi_goal not in sets[-1]:
        raise InfeasibleTransition("goal orientation not in the last node's set")

    def options(k, a):
        """Orientations reachable at node ``k`` from ``a`` that node ``k + 1`` admits."""
        run = _run_of(sets[k], a, K)
        return [b for b in run if b in sets[k + 1]]

    if policy == "stay_near_goal":
        seq = [phi_start]
        for k in range(n - 1):
            opts = options(k, seq[-1])
            if not opts:
                raise InfeasibleTransition(f"no shared orientation between path nodes {k} and {k + 1}")
            seq.append(min(opts, key=lambda b: (abs(wrap_steps(b - phi_goal, K)),
                                                abs(_arc(sets[k], seq[-1], b, K)), b)))
        if _arc(sets[-1], seq[-1], phi_goal, K) is None:
            raise InfeasibleTransition("goal orientation unreachable at the last node")
        return seq + [phi_goal]

    seq = _min_rotation_sequence(sets, phi_start, phi_goal, K, options, forced_keep=True)
    if seq is None:
        seq = _min_rotation_sequence(sets, phi_start, phi_goal, K, options, forced_keep=False)
    if seq is None:
        raise InfeasibleTransition("no orientation sequence along the path")
    return seq


def _min_rotation_sequence(sets, phi_start, phi_goal, K, options, forced_keep):
    """Backward dynamic program minimising (number of rotations, total rotation)."""
    n = len(sets)
    INF = (math.inf, math.inf)
    # best[k][a]: cost of finishing from node k holding orientation a
    best = [dict() for _ in range(n)]
    choice = [dict() for _ in range(n)]
    for a in sets[-1]:
        arc = _arc(sets[-1], a, phi_goal, K)
        best[-1][a] = INF if arc is None else (int(arc != 0), abs(arc))
    for k in range(n - 2, -1, -1):
        for a in sets[k]:
            if forced_keep and a in sets[k + 1]:
                cands = [a]
            else:
                cands = options(k, a)
            top, pick = INF, None
            for b in sorted(cands):
                tail = best[k + 1].get(b, INF)
                arc = _arc(sets[k], a, b, K)
                c = (tail[0] + int(arc != 0), tail[1] + abs(arc))
                if c < top:
                    top, pick = c, b
            best[k][a] = top
            choice[k][a] = pick
    if best[0].get(phi_start, INF)[0] == math.inf:
        return None
    seq = [phi_start]
    for k in range(n - 1):
        seq.append(choice[k][seq[-1]])
    return seq + [phi_goal]


def primitive_sequence(points, angles, sets, K: int, r_angle: float, frame,
                       nodes=()) -> PrimitiveSequence:
    """Rotations and translations realising the node path.

    ``points`` are the path contact points, ``angles`` the output of
    :func:`angle_sequence` and ``sets`` each node's usable steps.  Rotation
    ``k`` turns the finger at node ``k`` the collision-free way round.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    if len(angles) != len(pts) + 1:
        raise ValueError("need one more angle than path nodes")
    rotations = []
    for k in range(len(pts)):
        arc = _arc(sets[k], angles[k], angles[k + 1], K)
        if arc is None:
            raise InfeasibleTransition(f"rotation at path node {k} leaves the admissible set")
        rotations.append(int(arc))
    translations = tuple(pts[k + 1] - pts[k] for k in range(len(pts) - 1))
    return PrimitiveSequence(tuple(rotations), translations, r_angle, np.asarray(frame),
                             tuple(pts[0]), int(angles[0]), tuple(nodes))


def simplify(seq: PrimitiveSequence, collinearity_tol: float = math.radians(1.0)) -> PrimitiveSequence:
    """Merge consecutive translations with no rotation between them.

    A translation joins the running one when their directions differ by at
    most ``collinearity_tol`` (rad).  Zero-length translations are dropped
    when the rotations around them can be added together.
    """
    if not seq.translations:
        return seq
    rots = [seq.rotations[0]]
    trans: list[np.ndarray] = []
    for k, t in enumerate(seq.translations):
        t = np.asarray(t, dtype=float)
        nxt = seq.rotations[k + 1]
        if trans and rots[-1] == 0 and _aligned(trans[-1], t, collinearity_tol):
            trans[-1] = trans[-1] + t
            rots[-1] = nxt
            continue
        trans.append(t)
        rots.append(nxt)
    # zero translations between rotations carry no motion; fold the rotations together
    out_r, out_t = [rots[0]], []
    for t, r in zip(trans, rots[1:]):
        if not np.any(t):
            out_r[-1] += r
        else:
            out_t.append(t)
            out_r.append(r)
    return PrimitiveSequence(tuple(out_r), tuple(out_t), seq.r_angle, seq.frame, seq.start_point,
                             seq.start_step, seq.nodes)


def _aligned(a, b, tol) -> bool:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return True
    c = float(np.dot(a, b) / (na * nb))
    return math.acos(max(-1.0, min(1.0, c))) <= tol + 1e-12


@dataclass(frozen=True, eq=False)
class InHandPlan:
    path: InHandPath
    angles: tuple
    raw: PrimitiveSequence
    sequence: PrimitiveSequence


def plan_in_hand(dmg: DMG, model: SurfaceModel, start, goal,
                 opts: CostOptions = CostOptions()) -> InHandPlan:
    """Search, sequence and simplify one in-hand reconfiguration."""
    s = resolve_grasp(dmg, start) if not hasattr(start, "n1") else start
    d = resolve_grasp(dmg, goal) if not hasattr(goal, "n1") else goal
    path = in_hand_search(dmg, model, s, d, opts)
    K = steps_per_turn(dmg.r_angle)
    nodes, sets = _path_sets(path, dmg)
    angles = angle_sequence(path, s.k1, d.k1, K, opts.policy, sets=sets)
    pts = [dmg.nodes[n].centroid for n in nodes]
    frame = dmg.frame_of(nodes[0]).matrix
    raw = primitive_sequence(pts, angles, sets, K, dmg.r_angle, frame, nodes)
    seq = simplify(raw, opts.collinearity_tol)
    if len(seq) > opts.max_primitives:
        raise NoPath(f"in-hand sequence needs {len(seq)} primitives (limit {opts.max_primitives})")
    return InHandPlan(path, tuple(angles), raw, seq)
