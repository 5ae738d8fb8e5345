import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
import oracles
from dmgplan.dmg import generate_dmg
from dmgplan.errors import InfeasibleTransition, NoPath
from dmgplan.fixtures import MM, _cells, grid_lines, voxel_surface
from dmgplan.inhand import (
    CostOptions, PrimitiveSequence, angle_sequence, edge_cost, grasp_at, in_hand_search,
    opposite_finger_candidates, plan_in_hand, primitive_sequence, resolve_grasp, simplify,
)
from dmgplan.inhand.search import secondary_validity

def _node_near(g, point, normal, component=None):
    best = min((n for n in g.nodes.values() if n.normal @ normal > 0.99
                and (component is None or n.component_id == component)),
               key=lambda n: np.linalg.norm(n.centroid - point))
    return best.node_id


def _grasp(g, m, point, normal, k=0):
    n1 = _node_near(g, np.asarray(point), np.asarray(normal))
    steps, n2 = secondary_validity(g, m, n1, g.nodes[_opposite(g, m, n1)].component_id, 0.15)
    return grasp_at(g, n1, k if k in steps else min(steps), n2)


def _opposite(g, m, n1):
    return opposite_finger_candidates(g, m, n1)[-1].node_id


# opposite finger -------------------------------------------------------------------

def test_box_face_centre_has_one_full_candidate():
    g, m = helpers.dmg("box"), helpers.model("box")
    n1 = _node_near(g, [0.025, 0.025, 0.04], [0, 0, 1])
    cands = opposite_finger_candidates(g, m, n1)
    assert len(cands) == 1
    assert g.nodes[cands[0].node_id].normal[2] < -0.99
    assert len(cands[0].steps) == g.K


def test_u_channel_outer_wall_sees_both_walls():
    g, m = helpers.dmg("u_channel"), helpers.model("u_channel")
    n1 = _node_near(g, [0.0, 0.025, 0.02], [-1, 0, 0])
    cands = opposite_finger_candidates(g, m, n1)
    dists = sorted({round(c.distance, 6) for c in cands})
    assert dists == [0.01, 0.05, 0.06]
    assert len({g.nodes[c.node_id].component_id for c in cands}) == 3


def test_u_channel_floor_hit_yields_both_lobes():
    g, m = helpers.dmg("u_channel"), helpers.model("u_channel")
    found = 0
    for n in g.nodes.values():
        if n.normal[1] > -0.99:
            continue
        cands = opposite_finger_candidates(g, m, n.node_id)
        first = [c.node_id for c in cands if c.distance == cands[0].distance]
        if len(first) == 2:
            found += 1
            assert g.nodes[first[0]].patch_id == g.nodes[first[1]].patch_id
            assert g.nodes[first[0]].component_id != g.nodes[first[1]].component_id
    assert found


# search ----------------------------------------------------------------------------

def test_start_equals_goal():
    g, m = helpers.dmg("box"), helpers.model("box")
    s = _grasp(g, m, [0.025, 0.025, 0.04], [0, 0, 1])
    path = in_hand_search(g, m, s, s)
    assert path.nodes == (s.principal.node_id,) and path.cost == 0.0


def test_box_slide_matches_oracle():
    g, m = helpers.dmg("box"), helpers.model("box")
    s = _grasp(g, m, [0.005, 0.025, 0.04], [0, 0, 1])
    d = _grasp(g, m, [0.045, 0.025, 0.04], [0, 0, 1])
    path = in_hand_search(g, m, s, d)
    assert path.cost == oracles.oracle_inhand_cost(g, m, resolve_grasp(g, s), resolve_grasp(g, d))
    # sliding along one face with a free finger is the plain shortest path
    G = nx.Graph()
    for a, b, w in g.edge_list():
        G.add_edge(a, b, weight=w)
    assert path.cost == pytest.approx(nx.dijkstra_path_length(G, path.nodes[0], path.nodes[-1]))
    pts = np.array([g.nodes[n].centroid for n in path.nodes])
    assert np.all(np.diff(pts[:, 0]) > 0)


def test_cross_component_is_no_path():
    g, m = helpers.dmg("box"), helpers.model("box")
    s = _grasp(g, m, [0.025, 0.025, 0.04], [0, 0, 1])
    d = _grasp(g, m, [0.025, 0.0, 0.02], [0, -1, 0])
    with pytest.raises(NoPath):
        in_hand_search(g, m, s, d)


def _keel_plate():
    """80 x 60 x 5 mm plate with a 10 mm keel under its middle, open towards +y."""
    xs = grid_lines(0.0, 30 * MM, 50 * MM, 80 * MM, step=2.5 * MM)
    ys = grid_lines(0.0, 40 * MM, 60 * MM, step=2.5 * MM)
    zs = grid_lines(-10 * MM, 0.0, 5 * MM, step=2.5 * MM)
    occ = _cells(xs, ys, zs, lambda X, Y, Z: (Z > 0) | ((X > 30 * MM) & (X < 50 * MM)
                                                        & (Y < 40 * MM)))
    return voxel_surface(occ, xs, ys, zs)


def test_secondary_obstacle_forces_detour():
    m = _keel_plate()
    g = generate_dmg(m, r_area=0.01, r_angle=10)
    s = _grasp(g, m, [0.01, 0.02, 0.005], [0, 0, 1])
    d = _grasp(g, m, [0.07, 0.02, 0.005], [0, 0, 1])
    path = in_hand_search(g, m, s, d)
    G = nx.Graph()
    for a, b, w in g.edge_list():
        G.add_edge(a, b, weight=w)
    free = nx.dijkstra_path_length(G, path.nodes[0], path.nodes[-1])
    assert path.cost > free + 0.01
    over = [n for n in path.nodes if 0.03 < g.nodes[n].centroid[0] < 0.05]
    assert all(g.nodes[n].centroid[1] > 0.04 for n in over)
    assert path.cost == oracles.oracle_inhand_cost(g, m, resolve_grasp(g, s), resolve_grasp(g, d))


@settings(max_examples=40)
@given(st.sampled_from(["l_prism", "concave_block", "u_channel"]), st.integers(0, 10_000),
       st.sampled_from([0.0, 0.02]), st.sampled_from(["auto", None]))
def test_search_matches_oracle_with_options(name, seed, w_pull, bound):
    g, m = helpers.dmg(name), helpers.model(name)
    (s, d), = helpers.random_pairs(g, m, 1, seed=seed)
    opts = CostOptions(w_pull=w_pull, opposing_normal_bound=bound)
    rs, rd = resolve_grasp(g, s), resolve_grasp(g, d)
    try:
        got = in_hand_search(g, m, rs, rd, opts).cost
    except NoPath:
        got = None
    assert got == oracles.oracle_inhand_cost(g, m, rs, rd, w_pull=w_pull, bound=bound)


# edge cost -------------------------------------------------------------------------

def test_edge_cost_examples():
    g = helpers.dmg("box")
    j = _node_near(g, [0.025, 0.025, 0.04], [0, 0, 1])
    i = min(g.edges[j])
    dist = float(np.linalg.norm(g.nodes[i].centroid - g.nodes[j].centroid))
    full = frozenset(range(g.K))
    assert edge_cost(g, j, i, 0, full, full) == (dist, 0)
    cost, step = edge_cost(g, j, i, 0, full, frozenset({9}))
    assert step == 9 and cost == pytest.approx(dist + 0.05 * math.pi / 2)
    assert edge_cost(g, j, i, 0, full, None)[0] == math.inf


def test_edge_cost_pull_penalty():
    g = helpers.dmg("box")
    j = _node_near(g, [0.025, 0.025, 0.04], [0, 0, 1])
    full = frozenset(range(g.K))
    opts = CostOptions(w_pull=1.0)
    costs = {}
    for i in g.edges[j]:
        t = g.nodes[i].centroid - g.nodes[j].centroid
        d = g.frame_of(j).direction(0.0)
        costs[i] = (edge_cost(g, j, i, 0, full, full, opts)[0], float(t @ d) > 1e-12)
    assert any(p for _, p in costs.values()) and not all(p for _, p in costs.values())
    for i, (c, pull) in costs.items():
        base = float(np.linalg.norm(g.nodes[i].centroid - g.nodes[j].centroid))
        assert c == pytest.approx(base + (1.0 if pull else 0.0))


# angle sequences -------------------------------------------------------------------

def _steps(lo, hi):
    return frozenset(range(lo, hi + 1))


def test_free_nodes_keep_orientation():
    sets = [frozenset(range(36))] * 4
    assert angle_sequence(None, 3, 20, 36, sets=sets) == [3, 3, 3, 3, 20]


def test_min_rotations_versus_stay_near_goal():
    sets = [_steps(0, 10), _steps(5, 20), _steps(5, 25), _steps(5, 30)]
    lazy = angle_sequence(None, 0, 30, 72, "min_rotations", sets=sets)
    near = angle_sequence(None, 0, 30, 72, "stay_near_goal", sets=sets)
    rot = lambda seq: sum(1 for a, b in zip(seq, seq[1:]) if a != b)  # noqa: E731
    assert rot(lazy) == 2
    assert rot(near) >= 3
    assert near == [0, 10, 20, 25, 30]


def test_angle_sequence_rejects_bad_ends():
    sets = [_steps(0, 10), _steps(5, 20)]
    with pytest.raises(InfeasibleTransition):
        angle_sequence(None, 15, 10, 36, sets=sets)
    with pytest.raises(InfeasibleTransition):
        angle_sequence(None, 0, 30, 36, sets=sets)


@st.composite
def set_paths(draw):
    K = 36
    n = draw(st.integers(1, 6))
    sets, lo = [], draw(st.integers(0, K - 1))
    for _ in range(n):
        width = draw(st.integers(1, K))
        sets.append(frozenset((lo + k) % K for k in range(width)))
        # the next run must overlap this one
        lo = (lo + draw(st.integers(0, width - 1))) % K
    start = draw(st.sampled_from(sorted(sets[0])))
    goal = draw(st.sampled_from(sorted(sets[-1])))
    return K, sets, start, goal


@given(set_paths())
def test_min_rotations_keeps_when_possible(case):
    K, sets, start, goal = case
    seq = angle_sequence(None, start, goal, K, sets=sets)
    assert len(seq) == len(sets) + 1 and seq[0] == start and seq[-1] == goal
    for k in range(len(sets) - 1):
        assert seq[k + 1] in sets[k] and seq[k + 1] in sets[k + 1]
        if seq[k] in sets[k + 1]:
            assert seq[k + 1] == seq[k]


@given(set_paths())
def test_policies_produce_valid_sequences(case):
    K, sets, start, goal = case
    near = angle_sequence(None, start, goal, K, "stay_near_goal", sets=sets)
    for k in range(len(sets) - 1):
        assert near[k + 1] in sets[k] and near[k + 1] in sets[k + 1]


# primitives ------------------------------------------------------------------------

def _seq(points, angles, K=36):
    sets = [frozenset(range(K))] * len(points)
    return primitive_sequence(points, angles, sets, K, 360 / K, np.eye(3))


def test_two_node_primitive_sequence():
    seq = _seq([[0, 0, 0], [0.01, 0, 0]], [0, 0, 0])
    assert seq.rotations == (0, 0)
    np.testing.assert_array_equal(seq.translations[0], [0.01, 0, 0])


def test_rotation_between_translations():
    seq = _seq([[0, 0, 0], [0.01, 0, 0], [0.02, 0, 0]], [0, 0, 9, 9])
    assert seq.gammas == [0.0, math.pi / 2, 0.0]
    assert len(seq.translations) == 2


def test_rotation_takes_the_free_way_round():
    sets = [_steps(0, 20), _steps(0, 20)]
    seq = primitive_sequence([[0, 0, 0], [0.01, 0, 0]], [0, 20, 20], sets, 36, 10.0, np.eye(3))
    assert seq.rotations[0] == 20  # 200 deg the long way, the short way is blocked


def test_simplify_merges_collinear():
    pts = [[0.01 * k, 0, 0] for k in range(6)]
    out = simplify(_seq(pts, [0] * 7))
    assert len(out.translations) == 1
    np.testing.assert_allclose(out.translations[0], [0.05, 0, 0])


def test_simplify_keeps_rotation_boundaries():
    pts = [[0, 0, 0], [0.01, 0, 0], [0.02, 0, 0]]
    out = simplify(_seq(pts, [0, 0, 9, 9]))
    assert len(out.translations) == 2


def test_simplify_zigzag_tolerance():
    a = math.radians(7.5)
    steps = [[math.cos(a), math.sin(a), 0], [math.cos(a), -math.sin(a), 0]] * 2
    pts = np.cumsum([[0, 0, 0]] + [np.array(s) * 0.01 for s in steps], axis=0)
    seq = _seq(pts, [0] * (len(pts) + 1))
    tight = simplify(seq, math.radians(1))
    loose = simplify(seq, math.radians(20))
    assert len(tight.translations) == 4 and len(loose.translations) == 1
    np.testing.assert_allclose(loose.end_point(), seq.end_point(), atol=1e-15)


@st.composite
def random_sequences(draw):
    K = 36
    n = draw(st.integers(1, 8))
    coords = st.integers(-4, 4).map(lambda v: v * 2.5 * MM)
    pts = [[draw(coords), draw(coords), 0.0] for _ in range(n)]
    angles = [draw(st.integers(0, K - 1)) for _ in range(n + 1)]
    return _seq(pts, angles, K)


@given(random_sequences(), st.floats(0, 0.5))
def test_closure_survives_simplification(seq, tol):
    K = 36
    out = simplify(seq, tol)
    assert len(out) <= len(seq)
    np.testing.assert_allclose(out.translation_sum(), seq.translation_sum(), atol=1e-15)
    assert (out.rotation_sum() - seq.rotation_sum()) % K == 0
    end = np.asarray(seq.start_point) + sum(np.asarray(t) for t in seq.translations)
    np.testing.assert_allclose(seq.end_point(), end, atol=1e-15)


def test_sequence_dict_round_trip():
    seq = _seq([[0, 0, 0], [0.01, 0, 0], [0.01, 0.01, 0]], [0, 0, 9, 12])
    back = PrimitiveSequence.from_dict(seq.to_dict())
    assert back.rotations == seq.rotations
    np.testing.assert_array_equal(np.array(back.translations), np.array(seq.translations))


# full in-hand plans ----------------------------------------------------------------

def test_plan_in_hand_closure_on_fixture():
    g, m = helpers.dmg("concave_block"), helpers.model("concave_block")
    for s, d in helpers.random_pairs(g, m, 30, seed=5):
        try:
            plan = plan_in_hand(g, m, s, d)
        except NoPath:
            continue
        rs, rd = resolve_grasp(g, s), resolve_grasp(g, d)
        for seq in (plan.raw, plan.sequence):
            np.testing.assert_allclose(
                seq.translation_sum(), g.nodes[rd.n1].centroid - g.nodes[rs.n1].centroid,
                atol=1e-12)
            assert (seq.rotation_sum() - (rd.k1 - rs.k1)) % g.K == 0


def test_primitive_limit():
    g, m = helpers.dmg("box"), helpers.model("box")
    s = _grasp(g, m, [0.005, 0.005, 0.04], [0, 0, 1])
    d = _grasp(g, m, [0.045, 0.045, 0.04], [0, 0, 1], k=9)
    plan = plan_in_hand(g, m, s, d)
    assert len(plan.sequence) >= 2
    with pytest.raises(NoPath):
        plan_in_hand(g, m, s, d, CostOptions(max_primitives=1))
