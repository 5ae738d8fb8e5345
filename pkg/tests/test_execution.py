import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from dmgplan.errors import NoPushPoint
from dmgplan.execution import (
    EctsCommand, SimConfig, Twist, config_error, ects_compose, ects_matrix, ects_solve,
    find_push_point, integrate_rotation, rotation_twist, simulate_plan, swept_angle,
    translation_twist,
)
from dmgplan.inhand import FingerConfig, GraspConfig
from dmgplan.regrasp import RegraspOptions, dmg_search, opposing_grasp


def _node(g, point, normal):
    return min((n for n in g.nodes.values() if n.normal @ np.asarray(normal) > 0.99),
               key=lambda n: np.linalg.norm(n.centroid - point)).node_id


def _grasp(name, point, normal, k=0):
    g, m = helpers.dmg(name), helpers.model(name)
    return opposing_grasp(g, m, _node(g, point, normal), k)


vec6 = st.lists(st.floats(-10, 10), min_size=6, max_size=6)


# task-space coordination ------------------------------------------------------------

def test_ects_examples():
    x1 = Twist([1, 0, 0], [0, 0, 0])
    x2 = Twist([0, 1, 0], [0, 0, 1])
    c = ects_compose(x1, x2, 0.5)
    np.testing.assert_array_equal(c.absolute.vector(), [0.5, 0.5, 0, 0, 0, 0.5])
    np.testing.assert_array_equal(c.relative.vector(), [-1, 1, 0, 0, 0, 1])
    c = ects_compose(x1, x2, 1.0)
    np.testing.assert_array_equal(c.absolute.vector(), x1.vector())
    c = ects_compose(x1, x2, 0.0)
    np.testing.assert_array_equal(c.absolute.vector(), x2.vector())


@pytest.mark.parametrize("alpha,w1,w2", [(0.5, -0.5, 0.5), (1.0, 0.0, 1.0), (0.0, -1.0, 0.0)])
def test_ects_closed_forms(alpha, w1, w2):
    r = Twist([0, 0, 0.02], [0.1, 0, 0])
    x1, x2 = ects_solve(EctsCommand(Twist.zero(), r, alpha))
    np.testing.assert_array_equal(x1.vector(), w1 * r.vector())
    np.testing.assert_array_equal(x2.vector(), w2 * r.vector())


@given(vec6, vec6, st.floats(0, 1))
def test_ects_round_trip(a, b, alpha):
    x1, x2 = Twist.from_vector(a), Twist.from_vector(b)
    y1, y2 = ects_solve(ects_compose(x1, x2, alpha))
    np.testing.assert_allclose(y1.vector(), x1.vector(), atol=1e-12)
    np.testing.assert_allclose(y2.vector(), x2.vector(), atol=1e-12)
    c = ects_compose(x1, x2, alpha)
    np.testing.assert_allclose(ects_matrix(alpha) @ np.concatenate([a, b]),
                               np.concatenate([c.absolute.vector(), c.relative.vector()]),
                               atol=1e-12)


def test_twist_checks():
    with pytest.raises(ValueError):
        Twist([np.nan, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        Twist.zero() + Twist.zero("gripper1")
    with pytest.raises(ValueError):
        EctsCommand(Twist.zero(), Twist.zero(), 1.5)


# motion templates ------------------------------------------------------------------

def test_translation_twist_examples():
    tw = translation_twist([0, 0.05, 0], np.eye(3), k_p=1.0, error=0.05)
    np.testing.assert_allclose(tw.vector(), [0, -0.05, 0, 0, 0, 0])
    tw = translation_twist([0, 0.05, 0], np.eye(3), k_p=1.0, error=0.0)
    np.testing.assert_array_equal(tw.vector(), np.zeros(6))
    Rz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    tw = translation_twist([0, 0.05, 0], Rz, k_p=1.0, error=0.05)
    np.testing.assert_allclose(tw.v, [0.05, 0, 0], atol=1e-15)


def test_translation_speed_is_clamped():
    tw = translation_twist([1, 0, 0], np.eye(3), k_p=2.0, error=1.0, v_max=0.05)
    assert np.linalg.norm(tw.v) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        translation_twist([0, 0, 0], np.eye(3), error=1.0)


def test_rotation_twist_examples():
    np.testing.assert_allclose(rotation_twist(0.0, 0.0, 1.0).vector(), [0, 0, 1, 1, 0, 0])
    np.testing.assert_array_equal(rotation_twist(0.3, 0.2, 0.0).vector(), np.zeros(6))
    assert rotation_twist(0.0, 0.0, 1.0).frame == "gripper1"


@pytest.mark.parametrize("gamma_k", [math.radians(30), -math.radians(90), math.pi / 2])
def test_integrated_rotation_sweeps_minus_gamma(gamma_k):
    _, pts = integrate_rotation(0.4, gamma_k, dt=1e-4)
    assert swept_angle(pts) == pytest.approx(-gamma_k, abs=1e-6)
    np.testing.assert_allclose(np.hypot(pts[:, 1], pts[:, 2]), 1.0, atol=1e-9)


def test_rotation_twist_is_tangent():
    phi0, beta, h = 0.7, 0.3, 1e-6
    p = lambda b: np.array([0.0, math.cos(phi0 + b), math.sin(phi0 + b)])
    fd = (p(beta + h) - p(beta - h)) / (2 * h)
    np.testing.assert_allclose(rotation_twist(phi0, beta, 1.0).v, fd, atol=1e-8)


# push points -----------------------------------------------------------------------

def test_translation_push_point_on_the_far_side():
    m = helpers.model("bar")
    g = _grasp("bar", [0.06, 0.0075, 0.015], [0, 0, 1])
    pp = find_push_point(m, g, ("translate", [0.05, 0, 0]))
    assert pp[0] == pytest.approx(0.12)
    pp = find_push_point(m, g, ("translate", [-0.05, 0, 0]))
    assert pp[0] == pytest.approx(0.0)


def test_short_tab_has_no_push_point():
    m = helpers.model("bar")
    g = _grasp("bar", [0.1, 0.0075, 0.015], [0, 0, 1])
    with pytest.raises(NoPushPoint):
        find_push_point(m, g, ("translate", [0.05, 0, 0]))


def test_rotation_push_point_on_plate_rim():
    d, m = helpers.dmg("plate"), helpers.model("plate")
    g = _grasp("plate", [0.03, 0.03, 0.005], [0, 0, 1])
    F = d.frame(g.principal.component_id).matrix
    a = find_push_point(m, g, ("rotate", math.radians(30)), F)
    b = find_push_point(m, g, ("rotate", -math.radians(30)), F)
    # the two senses push on opposite rims
    side = np.cross(F[0], math.cos(g.principal.angle) * F[1] + math.sin(g.principal.angle) * F[2])
    assert (a - b) @ side < -0.05


# simulation ------------------------------------------------------------------------

def _sim_inhand(name, s, d, **kw):
    g, m = helpers.dmg(name), helpers.model(name)
    plan = dmg_search(g, m, s, d)
    return plan, simulate_plan(plan, m, SimConfig(**kw))


def test_simulated_translation():
    s = _grasp("bar", [0.03, 0.0075, 0.015], [0, 0, 1])
    d = _grasp("bar", [0.08, 0.0075, 0.015], [0, 0, 1])
    plan, traj = _sim_inhand("bar", s, d)
    dist, da = config_error(traj, plan.goal)
    assert dist <= 5e-4 and da <= math.radians(0.5)


def test_simulated_rotation():
    s = _grasp("box", [0.025, 0.025, 0.04], [0, 0, 1], k=0)
    d = _grasp("box", [0.025, 0.025, 0.04], [0, 0, 1], k=9)
    plan, traj = _sim_inhand("box", s, d)
    assert plan.phases[0].sequence.rotation_sum() == 9
    dist, da = config_error(traj, plan.goal)
    assert dist <= 5e-4 and da <= math.radians(0.5)


def test_fingertip_stays_on_the_surface():
    m = helpers.model("bar")
    s = _grasp("bar", [0.03, 0.0075, 0.015], [0, 0, 1])
    d = _grasp("bar", [0.08, 0.0075, 0.015], [0, 0, 1])
    _, traj = _sim_inhand("bar", s, d)
    for st_ in traj.states:
        p, _ = st_.config[1]
        assert p[2] == pytest.approx(0.015, abs=1e-9)


def test_regrasp_plan_end_to_end():
    g, m = helpers.dmg("plate"), helpers.model("plate")
    s = _grasp("plate", [0.01, 0.01, 0.005], [0, 0, 1])
    d = _grasp("plate", [0.05, 0.05, 0.0], [0, 0, -1], k=9)
    plan = dmg_search(g, m, s, d, RegraspOptions())
    traj = simulate_plan(plan, m)
    dist, da = config_error(traj, plan.goal)
    assert dist <= g.r_area and da <= math.radians(g.r_angle)
    seps = [e for e in traj.events if e["event"] == "separation"]
    assert len(seps) == 2 and all(e["ok"] for e in seps)
    # object stays rigid: only whole-body motion
    for st_ in traj.states[::50]:
        R = st_.T_object[:3, :3]
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)


def test_alpha_does_not_change_the_outcome():
    g, m = helpers.dmg("plate"), helpers.model("plate")
    s = _grasp("plate", [0.01, 0.01, 0.005], [0, 0, 1])
    d = _grasp("plate", [0.05, 0.05, 0.005], [0, 0, 1], k=9)
    plan = dmg_search(g, m, s, d)
    finals = [simulate_plan(plan, m, alpha=a).final_config(1) for a in (0.0, 0.5, 1.0)]
    for p, a in finals[1:]:
        np.testing.assert_allclose(p, finals[0][0], atol=1e-9)
        assert a == pytest.approx(finals[0][1], abs=1e-9)


def test_export(tmp_path):
    s = _grasp("box", [0.025, 0.025, 0.04], [0, 0, 1], k=0)
    d = _grasp("box", [0.025, 0.025, 0.04], [0, 0, 1], k=3)
    _, traj = _sim_inhand("box", s, d, record_every=10)
    traj.export_jsonl(tmp_path / "t.jsonl")
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert len(lines) == len(traj.states)
    paths = traj.export_ply(tmp_path / "ply", helpers.model("box"), every=20)
    assert paths and all(p.exists() for p in paths)


def test_bad_config():
    with pytest.raises(ValueError):
        SimConfig(dt=0)
