import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from scenetext.errors import DegenerateDirection, SchemaError, ValidationError
from scenetext.scene import CameraPose, PriorRule, PriorTable, Scene, SceneObject, Vec3
from scenetext.spatial import (
    Kind,
    ReasonerConfig,
    RelationTag,
    RelationTriplet,
    VerticalAxis,
    build_scene_graph,
    euclidean_distance,
    graph_from_list,
    graph_to_list,
    horizontal_angle,
    is_nearby,
    relate_pair,
    salient_pairs,
    sector_label,
)
from scenetext.synthetic import default_priors, generate_synthetic_scene

from conftest import box, make_scene

CAM = CameraPose(Vec3(0, -10, 0), Vec3(0, 1, 0), Vec3(0, 0, 1))
NO_PRIORS = PriorTable()

# frozen oracle values (independent calculator)
DIST_111_235 = 4.58257569495584
THETA_MINUS_X_PLUS_Y = 315.0


@pytest.mark.parametrize(
    "a,b,expected",
    [((0, 0, 0), (3, 4, 0), 5.0), ((1, 2, 3), (1, 2, 3), 0.0), ((1, 1, 1), (2, 3, 5), DIST_111_235)],
)
def test_euclidean_distance(a, b, expected):
    assert euclidean_distance(a, b) == pytest.approx(expected, abs=1e-4)
    assert euclidean_distance(b, a) == euclidean_distance(a, b)


def test_nearby_examples():
    assert is_nearby(box(0, "a", (0, 0, 0), (0.2, 0.2, 0.2)), box(1, "b", (0, 0, 0)), 1.0)
    assert not is_nearby(box(0, "a", (0, 0, 0)), box(1, "b", (10, 0, 0)), 1.0)
    a = box(0, "a", (0, 0, 0), (1, 1, 1))
    b = box(1, "b", (1.4, 0, 0), (1.0, 1.0, 1.5))
    assert is_nearby(a, b, 1.0) and is_nearby(b, a, 1.0)
    assert not is_nearby(a, b, 0.9)


def test_horizontal_angle_examples():
    cam = CameraPose(Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1))
    assert horizontal_angle(cam.forward, cam) == 0.0
    assert horizontal_angle((1, 0, 0), cam) == pytest.approx(90.0)
    assert horizontal_angle((-1, 1, 0), cam) == pytest.approx(THETA_MINUS_X_PLUS_Y)
    assert horizontal_angle((0, -1, 0), cam) == pytest.approx(180.0)


def test_horizontal_angle_ignores_vertical_component():
    assert horizontal_angle((1, 0, 7), CAM) == pytest.approx(90.0)


def test_degenerate_direction():
    with pytest.raises(DegenerateDirection):
        horizontal_angle((0, 0, 3), CAM)


@pytest.mark.parametrize("theta,hour", [(0, 12), (90, 3), (200, 7), (359, 12), (14.9, 12), (15.1, 1), (180, 6)])
def test_sector_label(theta, hour):
    assert sector_label(theta, 12) == hour


def test_sector_label_coarser_dial():
    # 4 sectors snap to 12, 3, 6, 9
    assert [sector_label(t, 4) for t in (10, 80, 170, 260, 350)] == [12, 3, 6, 9, 12]


@given(st.floats(0, 359.999))
def test_sector_jumps_only_at_odd_half_widths(theta):
    # away from boundaries at odd multiples of 15 degrees the label is locally constant
    boundary = (theta - 15.0) % 30.0
    assume(0.01 < boundary < 29.99)
    assert sector_label(theta, 12) == sector_label(max(0.0, theta - 0.005), 12)


def test_prior_short_circuits():
    priors = PriorTable((PriorRule("monitor", "desk", "on"),))
    t = relate_pair(box(0, "monitor", (50, 0, 9)), box(1, "desk", (0, 0, 0)), CAM, priors)
    assert t.tags == frozenset({RelationTag(Kind.PRIOR, text="on")})
    assert t.theta_deg is None


def test_front_no_vertical_tag_when_coplanar():
    t = relate_pair(box(0, "a", (0, 5, 0)), box(1, "b", (0, 0, 0)), CAM, NO_PRIORS)
    assert {Kind.IN_FRONT_OF, Kind.OCLOCK} <= t.kinds
    assert t.tag(Kind.OCLOCK).hour == 12
    assert not t.kinds & {Kind.ABOVE, Kind.BELOW}


def test_above_right_three_oclock():
    t = relate_pair(box(0, "a", (3, 0, 2)), box(1, "b", (0, 0, 0)), CAM, NO_PRIORS)
    assert {Kind.ABOVE, Kind.RIGHT_OF} <= t.kinds
    assert t.tag(Kind.OCLOCK).hour == 3
    assert t.theta_deg == pytest.approx(90.0)


def test_nearby_exclusive_and_inclusive():
    a, b = box(0, "a", (0.5, 0, 0.2)), box(1, "b", (0, 0, 0))
    assert relate_pair(a, b, CAM, NO_PRIORS).kinds == {Kind.NEARBY}
    loose = relate_pair(a, b, CAM, NO_PRIORS, ReasonerConfig(nearby_exclusive=False))
    assert {Kind.NEARBY, Kind.ABOVE, Kind.RIGHT_OF} <= loose.kinds


def test_directly_above_emits_vertical_only():
    t = relate_pair(box(0, "a", (0, 0, 5)), box(1, "b", (0, 0, 0)), CAM, NO_PRIORS)
    assert t.kinds == {Kind.ABOVE}
    assert t.theta_deg is None


def test_vertical_axis_option():
    tilted = CameraPose(Vec3(0, 0, 0), Vec3(0, math.sqrt(0.5), -math.sqrt(0.5)), Vec3(0, math.sqrt(0.5), math.sqrt(0.5)))
    a, b = box(0, "a", (0, -3, 3.5)), box(1, "b", (0, 0, 0))
    # r = (0, -3, 3.5): positive along world +z, and r . camera_up > 0 as well
    world = relate_pair(a, b, tilted, NO_PRIORS, ReasonerConfig(vertical_axis=VerticalAxis.WORLD_UP))
    assert Kind.ABOVE in world.kinds
    a2 = box(0, "a", (0, -5, 3))  # r . camera_up < 0 but world z > 0
    cam_rel = relate_pair(a2, b, tilted, NO_PRIORS)
    world_rel = relate_pair(a2, b, tilted, NO_PRIORS, ReasonerConfig(vertical_axis="world_up"))
    assert Kind.BELOW in cam_rel.kinds and Kind.ABOVE in world_rel.kinds


def test_tolerance_boundaries():
    cfg = ReasonerConfig(theta_tol_deg=30)
    b = box(1, "b", (0, 0, 0))
    at = lambda deg: box(0, "a", (10 * math.sin(math.radians(deg)), 10 * math.cos(math.radians(deg)), 0))
    assert Kind.IN_FRONT_OF in relate_pair(at(29), b, CAM, NO_PRIORS, cfg).kinds
    assert Kind.RIGHT_OF in relate_pair(at(31), b, CAM, NO_PRIORS, cfg).kinds
    assert Kind.BEHIND in relate_pair(at(200), b, CAM, NO_PRIORS, cfg).kinds
    assert Kind.LEFT_OF in relate_pair(at(300), b, CAM, NO_PRIORS, cfg).kinds


def test_same_object_rejected():
    a = box(0, "a", (0, 0, 0))
    with pytest.raises(ValidationError):
        relate_pair(a, a, CAM, NO_PRIORS)


@pytest.mark.parametrize(
    "kw", [{"beta": 0}, {"theta_tol_deg": 90}, {"theta_tol_deg": 0}, {"n_sectors": 3}, {"saliency_m": 0}]
)
def test_config_bounds(kw):
    with pytest.raises(ValidationError):
        ReasonerConfig(**kw)


def test_triplet_invariants():
    with pytest.raises(ValidationError):
        RelationTriplet(1, 1, frozenset({RelationTag(Kind.NEARBY)}), 1.0)
    with pytest.raises(ValidationError):
        RelationTriplet(0, 1, frozenset(), 1.0)
    with pytest.raises(ValidationError):
        RelationTriplet(0, 1, frozenset({RelationTag(Kind.LEFT_OF), RelationTag(Kind.RIGHT_OF)}), 1.0, 90.0)
    with pytest.raises(ValidationError):
        RelationTriplet(0, 1, frozenset({RelationTag(Kind.LEFT_OF)}), 1.0)
    with pytest.raises(ValidationError):
        RelationTag(Kind.OCLOCK, hour=13)


@pytest.mark.parametrize("raw", ["nearby", "above", "below", "in_front_of", "behind", "left_of", "right_of", "oclock_7", "prior:tucked under"])
def test_tag_spellings_round_trip(raw):
    assert str(RelationTag.parse(raw)) == raw


def test_unknown_tag_spelling():
    with pytest.raises(SchemaError):
        RelationTag.parse("sideways")


# scene graph -----------------------------------------------------------------


def test_graph_empty_for_single_object():
    assert build_scene_graph(make_scene([box(0, "a", (0, 0, 0))]), NO_PRIORS) == []


def test_graph_three_objects_all_pairs():
    scene = make_scene([box(i, "a", (3 * i, 0, 0)) for i in range(3)])
    graph = build_scene_graph(scene, NO_PRIORS)
    assert [t.key for t in graph] == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


def _knn_oracle(scene, m):
    objs = scene.objects
    pairs = set()
    for a in objs:
        ranked = sorted((math.dist(a.centroid, b.centroid), b.id) for b in objs if b.id != a.id)
        for _, bid in ranked[:m]:
            pairs |= {(a.id, bid), (bid, a.id)}
    return pairs


def test_graph_matches_knn_oracle(scene20):
    graph = build_scene_graph(scene20, NO_PRIORS, ReasonerConfig(saliency_m=3))
    assert {t.key for t in graph} == _knn_oracle(scene20, 3)


def test_prior_pairs_always_kept():
    objs = [box(0, "monitor", (0, 0, 0)), box(1, "desk", (50, 50, 0))] + [box(i, "lamp", (i * 0.1, 3, 0), (0.05, 0.05, 0.05)) for i in range(2, 8)]
    pairs = salient_pairs(make_scene(objs), default_priors(), 1)
    assert (0, 1) in pairs


def test_graph_parallel_matches_serial():
    scene = generate_synthetic_scene(5, 40)
    assert build_scene_graph(scene, default_priors(), jobs=4) == build_scene_graph(scene, default_priors())


def test_graph_file_round_trip(scene20):
    graph = build_scene_graph(scene20, default_priors())
    assert graph_from_list(graph_to_list(graph)) == graph


# invariants ------------------------------------------------------------------

OPPOSITE = {Kind.LEFT_OF: Kind.RIGHT_OF, Kind.RIGHT_OF: Kind.LEFT_OF, Kind.IN_FRONT_OF: Kind.BEHIND, Kind.BEHIND: Kind.IN_FRONT_OF, Kind.ABOVE: Kind.BELOW, Kind.BELOW: Kind.ABOVE}


def _yaw(v, deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return (c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])


def _transform(scene, fn_point, fn_dir=lambda v: v, scale=1.0):
    objs = [SceneObject(o.id, o.label, Vec3.of(fn_point(o.centroid)), Vec3.of(np.multiply(o.size, scale))) for o in scene.objects]
    cam = scene.camera
    cam2 = CameraPose(Vec3.of(fn_point(cam.position)), Vec3.of(fn_dir(cam.forward)), Vec3.of(fn_dir(cam.up)))
    return Scene(scene.scene_id, tuple(objs), cam2)


def _tags(scene):
    return [(t.key, t.sorted_tags()) for t in build_scene_graph(scene, default_priors())]


@given(st.integers(0, 5000))
def test_antisymmetry(seed):
    scene = generate_synthetic_scene(seed, 8)
    by_id = {o.id: o for o in scene.objects}
    for a in scene.objects:
        for b in scene.objects:
            if a.id >= b.id or default_priors().lookup(a.label, b.label) or default_priors().lookup(b.label, a.label):
                continue
            ab = relate_pair(a, b, scene.camera, default_priors())
            ba = relate_pair(by_id[b.id], a, scene.camera, default_priors())
            for k, opp in OPPOSITE.items():
                assert (k in ab.kinds) == (opp in ba.kinds)
            if ab.tag(Kind.OCLOCK):
                assert (ab.tag(Kind.OCLOCK).hour - ba.tag(Kind.OCLOCK).hour) % 12 == 6


@given(st.integers(0, 5000), st.tuples(*[st.floats(-50, 50)] * 3))
def test_translation_invariance(seed, shift):
    scene = generate_synthetic_scene(seed, 8)
    moved = _transform(scene, lambda p: np.add(p, shift))
    assert _tags(moved) == _tags(scene)


@given(st.integers(0, 5000), st.floats(0, 360))
def test_yaw_equivariance(seed, deg):
    scene = generate_synthetic_scene(seed, 8)
    turned = _transform(scene, lambda p: _yaw(p, deg), lambda v: _yaw(v, deg))
    assert _tags(turned) == _tags(scene)


@given(st.integers(0, 5000), st.floats(0.01, 100))
def test_nearby_scale_invariance(seed, s):
    scene = generate_synthetic_scene(seed, 8)
    scaled = _transform(scene, lambda p: np.multiply(p, s), scale=s)
    for a, a2 in zip(scene.objects, scaled.objects):
        for b, b2 in zip(scene.objects, scaled.objects):
            if a.id != b.id:
                assert is_nearby(a, b, 1.0) == is_nearby(a2, b2, 1.0)
