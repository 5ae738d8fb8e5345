import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
import oracles
from dmgplan import fixtures
from dmgplan.errors import DegenerateGeometry, InvalidFrame, ParseError, ResolutionTooCoarse
from dmgplan.geometry import (
    SurfaceModel, finger_collides, free_angles, load_surface, ray_intersections,
    segment_surface, write_obj, write_ply,
)
from dmgplan.geometry.raycast import closest_points_on_triangles

MM = 1e-3

CUBE_V = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                   [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
CUBE_F = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4],
                   [1, 2, 6], [1, 6, 5], [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])


@pytest.fixture
def cube_obj(tmp_path):
    path = tmp_path / "cube.obj"
    write_obj(path, CUBE_V, CUBE_F)
    return path


# loading ---------------------------------------------------------------------------

def test_cube_obj_loads(cube_obj):
    m = load_surface(cube_obj)
    assert len(m.vertices) == 8 and len(m.triangles) == 12
    assert m.signed_volume() == pytest.approx(1.0)


def test_units_scale(cube_obj):
    m = load_surface(cube_obj, units_scale=0.001)
    np.testing.assert_allclose(m.bounds[1] - m.bounds[0], [1e-3] * 3)


def test_duplicate_and_degenerate_faces_dropped(tmp_path):
    faces = np.vstack([CUBE_F, CUBE_F[:1], [[0, 0, 1]], [[1, 2, 2]]])
    path = tmp_path / "dirty.obj"
    write_obj(path, CUBE_V, faces)
    with pytest.warns(UserWarning, match="dropped 3"):
        m = load_surface(path)
    assert len(m.triangles) == 12


def test_inverted_winding_is_reoriented(tmp_path):
    path = tmp_path / "inside_out.obj"
    write_obj(path, CUBE_V, CUBE_F[:, ::-1])
    assert load_surface(path).signed_volume() > 0


def test_malformed_obj_raises(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 x 0\n")
    with pytest.raises(ParseError):
        load_surface(path)


def test_coplanar_vertices_rejected(tmp_path):
    path = tmp_path / "flat.obj"
    write_obj(path, [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    with pytest.raises(DegenerateGeometry):
        load_surface(path)


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "cube.stl"
    path.write_text("solid")
    with pytest.raises(ParseError):
        load_surface(path)


@pytest.mark.parametrize("binary", [True, False])
def test_ply_round_trip(tmp_path, binary):
    m = fixtures.box()
    path = tmp_path / "box.ply"
    write_ply(path, m.vertices, m.triangles, [200, 10, 10], binary=binary)
    back = load_surface(path)
    np.testing.assert_allclose(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)


# segmentation ----------------------------------------------------------------------

def test_box_face_patch_counts():
    m = helpers.model("box")
    pg = segment_surface(m, 0.01)
    top = [p for p in pg.patches.values() if p.normal[2] > 0.99]
    bottom = [p for p in pg.patches.values() if p.normal[2] < -0.99]
    for face in (top, bottom):
        assert 15 <= len(face) <= 35


@pytest.mark.parametrize("name", ["box", "l_prism", "concave_block", "u_channel"])
def test_segmentation_partitions_surface(name):
    m = helpers.model(name)
    pg = segment_surface(m, 0.01)
    members = np.concatenate([p.triangles for p in pg.patches.values()])
    assert sorted(members.tolist()) == list(range(len(m.triangles)))
    for pid, p in pg.patches.items():
        assert np.all(pg.triangle_patch[p.triangles] == pid)
        assert np.linalg.norm(p.normal) == pytest.approx(1.0)
        for q in p.neighbor_ids:
            assert pid in pg.patches[q].neighbor_ids
        a, b, c = (m.corners[p.triangles, i] for i in range(3))
        _, d2 = closest_points_on_triangles(p.centroid, a, b, c)
        assert math.sqrt(d2.min()) <= 0.001


def test_patch_normal_is_area_weighted_mean():
    m = helpers.model("concave_block")
    pg = segment_surface(m, 0.01)
    for p in pg.patches.values():
        w = (m.normals[p.triangles] * m.areas[p.triangles, None]).sum(axis=0)
        np.testing.assert_allclose(p.normal, w / np.linalg.norm(w), atol=1e-12)


def test_sphere_segmentation_invariants():
    m = fixtures.icosphere()
    pg = segment_surface(m, 0.01)
    assert len(pg) >= 4
    for pid, p in pg.patches.items():
        assert np.linalg.norm(p.normal) == pytest.approx(1.0)
        assert all(pid in pg.patches[q].neighbor_ids for q in p.neighbor_ids)


def test_coarse_plate_segmentation():
    m = helpers.model("plate")
    with pytest.raises(ValueError):
        segment_surface(m, 0.06)
    pg = segment_surface(m, 0.04)
    assert len({round(p.normal[2]) for p in pg.patches.values() if abs(p.normal[2]) > 0.9}) == 2


def test_too_coarse_raises():
    # without the crease term a thin rod is covered by a handful of seeds
    m = fixtures.box((100 * MM, 5 * MM, 5 * MM))
    with pytest.raises(ResolutionTooCoarse):
        segment_surface(m, 0.049, normal_weight=0.0)


def test_segmentation_deterministic():
    m = helpers.model("l_prism")
    a, b = segment_surface(m, 0.01), segment_surface(m, 0.01)
    np.testing.assert_array_equal(a.triangle_patch, b.triangle_patch)


# rays ------------------------------------------------------------------------------

def test_cube_ray_from_face_centre():
    m = helpers.model("box")
    hits = ray_intersections(m, [0.025, 0.025, 0.04], [0, 0, -1])
    assert len(hits) == 1
    assert hits[0].distance == pytest.approx(0.04)


def test_ray_missing_object():
    m = helpers.model("box")
    assert ray_intersections(m, [0.2, 0.2, 0.2], [1, 0, 0]) == []


def test_u_channel_ray_crosses_both_walls():
    m = helpers.model("u_channel")
    pg = segment_surface(m, 0.01)
    hits = ray_intersections(m, [-0.01, 0.025, 0.0201], [1, 0, 0], pg)
    d = [h.distance for h in hits]
    np.testing.assert_allclose(d, [0.01, 0.02, 0.06, 0.07], atol=1e-12)
    assert all(h.patch_id is not None for h in hits)


def test_self_hit_suppressed():
    m = helpers.model("box")
    hits = m.raycast([0.025, 0.025, 0.04], [0, 0, 1])
    assert hits == []


def test_convex_model_single_hit_along_inward_normal():
    m = fixtures.icosphere()
    rng = np.random.default_rng(4)
    for t in rng.choice(len(m.triangles), 50, replace=False):
        w = rng.dirichlet([1, 1, 1])
        p = w @ m.corners[t]
        assert len(m.raycast(p, -m.normals[t])) == 1


def _random_ray(draw, m):
    lo, hi = m.bounds
    pad = 0.01
    o = [draw(st.floats(lo[i] - pad, hi[i] + pad)) for i in range(3)]
    d = [draw(st.floats(-1, 1)) for _ in range(3)]
    return np.array(o), np.array(d)


@st.composite
def fixture_rays(draw):
    name = draw(st.sampled_from(["box", "l_prism", "u_channel", "concave_block", "pit_block"]))
    m = helpers.model(name)
    kind = draw(st.sampled_from(["free", "grid", "surface"]))
    if kind == "surface":
        t = draw(st.integers(0, len(m.triangles) - 1))
        return m, m.centroids[t], -m.normals[t]
    o, d = _random_ray(draw, m)
    if kind == "grid":
        # axis-aligned rays through grid lines exercise shared edges and vertices
        o = np.round(o / 0.0025) * 0.0025
        d = np.zeros(3)
        d[draw(st.integers(0, 2))] = draw(st.sampled_from([-1.0, 1.0]))
    return m, o, d


@settings(max_examples=300)
@given(fixture_rays())
def test_raycast_matches_brute_force(case):
    m, o, d = case
    if np.linalg.norm(d) < 1e-6:
        return
    got = [(h.distance, h.triangle) for h in m.raycast(o, d)]
    want = oracles.brute_raycast(m.vertices, m.triangles, o, d)
    assert [t for _, t in got] == [t for _, t in want]
    np.testing.assert_allclose([s for s, _ in got], [s for s, _ in want], atol=1e-9)


def test_raycast_deterministic():
    m = helpers.model("concave_block")
    a = m.raycast([0.0, 0.015, 0.02], [1, 0.01, 0])
    b = m.raycast([0.0, 0.015, 0.02], [1, 0.01, 0])
    assert [(h.distance, h.triangle) for h in a] == [(h.distance, h.triangle) for h in b]


def test_contains():
    m = helpers.model("l_prism")
    assert m.contains([0.01, 0.01, 0.01])
    assert not m.contains([0.04, 0.04, 0.01])
    assert not m.contains([0.1, 0.0, 0.0])


# finger ----------------------------------------------------------------------------

UP = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)  # x = +z, y = +x, z = +y


def test_plate_finger_never_collides():
    m = helpers.model("plate")
    angles = np.radians(np.arange(0, 360, 5))
    assert free_angles(m, [0.03, 0.03, 0.005], UP, angles, 0.04).all()


def test_finger_into_wall_collides():
    m = helpers.model("wall_block")
    assert finger_collides(m, [0.006, 0.03, 0.005], UP, math.pi, 0.04)
    assert not finger_collides(m, [0.006, 0.03, 0.005], UP, 0.0, 0.04)


def test_finger_30mm_from_wall():
    m = helpers.model("wall_block")
    contact = [0.035, 0.03, 0.005]
    assert finger_collides(m, contact, UP, math.pi, 0.04)
    assert not finger_collides(m, contact, UP, 0.0, 0.04)
    # just short of the wall
    assert not finger_collides(m, contact, UP, math.pi, 0.029)


def test_wall_removes_about_half_the_angles():
    m = helpers.model("wall_block")
    angles = np.radians(np.arange(0, 360, 5))
    free = free_angles(m, [0.007, 0.03, 0.005], UP, angles, 0.04)
    assert 0.4 <= free.mean() <= 0.6


def test_slot_blocks_every_direction():
    m = helpers.model("pit_block")
    angles = np.radians(np.arange(0, 360, 5))
    # centre of the pit floor: every wall is 10 mm away, finger 40 mm long
    assert not free_angles(m, [0.03, 0.03, 0.01], UP, angles, 0.04).any()


@given(st.floats(0, 2 * math.pi, exclude_max=True))
def test_zero_length_finger_never_collides(phi):
    m = helpers.model("wall_block")
    assert not finger_collides(m, [0.006, 0.03, 0.005], UP, phi, 0.0)


def test_invalid_frame():
    m = helpers.model("plate")
    with pytest.raises(InvalidFrame):
        finger_collides(m, [0.03, 0.03, 0.005], np.eye(3) * 2, 0.0, 0.04)


def test_finger_width_is_more_conservative():
    m = helpers.model("wall_block")
    angles = np.radians(np.arange(0, 360, 5))
    thin = free_angles(m, [0.02, 0.03, 0.005], UP, angles, 0.04)
    wide = free_angles(m, [0.02, 0.03, 0.005], UP, angles, 0.04, width=0.01)
    assert not (wide & ~thin).any()
    assert wide.sum() < thin.sum()


def test_from_arrays_polygon_faces():
    quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = SurfaceModel.from_arrays(CUBE_V, quads)
    assert len(m.triangles) == 12
