import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scenetext.errors import ValidationError
from scenetext.projection import (
    CROP_MARGIN,
    box_corners,
    crop_manifest,
    project_box,
    quaternion_matrix,
    select_views,
)
from scenetext.scene import CameraPose, SceneObject, Vec3, View

from conftest import box

INTR = (500.0, 500.0, 320.0, 320.0)


def cam_at(position=(0, 0, 0), forward=(0, 1, 0), up=(0, 0, 1), image=(640, 640)):
    return CameraPose(Vec3.of(position), Vec3.of(forward), Vec3.of(up), INTR, image)


def pinhole(point, position=(0, 0, 0)):
    # camera looks along +y with +z up: x_cam = x, y_cam = -z, depth = y
    x, y, z = np.subtract(point, position)
    return 500 * x / y + 320, 500 * -z / y + 320


def test_unit_cube_straight_ahead():
    region = project_box(box(0, "cube", (0, 5, 0)), cam_at())
    assert region is not None and region.visible_corners == 8
    x0, y0, x1, y1 = region.rect
    assert (x0 + x1) / 2 == pytest.approx(320) and (y0 + y1) / 2 == pytest.approx(320)
    # near face at 4.5 m bounds the projection; margin adds 10% per side
    near_side = 2 * 500 * 0.5 / 4.5
    assert x1 - x0 == pytest.approx(near_side * (1 + 2 * CROP_MARGIN))


def test_rect_matches_pinhole_oracle():
    obj = box(0, "cube", (0.7, 6, -0.3), (0.4, 0.8, 0.6))
    pts = [pinhole(c) for c in itertools.product((0.5, 0.9), (5.6, 6.4), (-0.6, 0.0))]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    w, h = max(xs) - min(xs), max(ys) - min(ys)
    expected = (min(xs) - 0.1 * w, min(ys) - 0.1 * h, max(xs) + 0.1 * w, max(ys) + 0.1 * h)
    assert project_box(obj, cam_at()).rect == pytest.approx(expected)


def test_behind_camera_is_invisible():
    assert project_box(box(0, "cube", (0, -1, 0), (0.5, 0.5, 0.5)), cam_at()) is None


def test_two_corners_on_edge():
    # a box tilted about the viewing axis, slid onto the left border until
    # only two of its corners are in the image
    tilt = (0.0, np.sin(np.radians(10)), 0.0, np.cos(np.radians(10)))
    obj = SceneObject(0, "cube", Vec3(-3.44, 5, 0), Vec3(0.4, 0.4, 0.4), orientation=tilt)
    region = project_box(obj, cam_at())
    assert region is not None and region.visible_corners == 2
    assert region.rect[0] == 0.0


def test_collinear_corners_give_no_region():
    # two in-image corners stacked vertically span zero width
    x_edge = -320 * 5.1 / 500
    assert project_box(box(0, "cube", (x_edge - 0.1, 5, 0), (0.2, 0.2, 0.2)), cam_at()) is None


def test_rect_clipped_to_image():
    obj = box(0, "sofa", (0, 3, 0), (4, 1, 1))
    region = project_box(obj, cam_at())
    assert region is not None
    x0, y0, x1, y1 = region.rect
    assert 0 <= x0 < x1 <= 640 and 0 <= y0 < y1 <= 640


def test_requires_intrinsics():
    with pytest.raises(ValidationError):
        project_box(box(0, "a", (0, 5, 0)), CameraPose(Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)))


def test_quaternion_rotation_corners():
    q = (0, 0, np.sin(np.pi / 4), np.cos(np.pi / 4))  # 90 degrees about z
    obj = SceneObject(0, "shelf", Vec3(0, 0, 0), Vec3(2, 1, 1), orientation=q)
    corners = box_corners(obj)
    assert np.ptp(corners[:, 0]) == pytest.approx(1.0)
    assert np.ptp(corners[:, 1]) == pytest.approx(2.0)
    assert np.allclose(quaternion_matrix(None), np.eye(3))


def _views(n):
    out = []
    for i in range(n):
        ang = 2 * np.pi * i / n
        pos = (6 * np.sin(ang), -6 * np.cos(ang), 0)
        fwd = (-np.sin(ang), np.cos(ang), 0)
        out.append(View(f"frame_{i:03d}", cam_at(pos, fwd)))
    return out


def test_select_views_invisible():
    far = box(0, "a", (0, 0, 500))
    assert select_views(far, _views(4), 3) == []


def test_select_views_prefers_more_corners():
    obj = box(0, "a", (0, 5, 0))
    full = View("full", cam_at())
    partial = View("partial", cam_at((2.5, 0, 0)))
    assert project_box(obj, partial).visible_corners < 8
    (best,) = select_views(obj, [partial, full], 1)
    assert best.frame_id == "full"


def test_select_views_brute_force():
    obj = box(0, "a", (0.3, 0.2, 0.1), (0.8, 0.5, 0.6))
    views = _views(10)
    regions = [r for r in (project_box(obj, v) for v in views) if r is not None]
    oracle = sorted(regions, key=lambda r: (-r.visible_corners, -r.area, r.frame_id))[:3]
    assert select_views(obj, views, 3) == oracle


def test_manifest_schema():
    manifest = crop_manifest([box(0, "a", (0, 0, 0))], _views(3), 2)
    assert manifest and set(manifest[0]) >= {"object_id", "frame_id", "rect", "visible_corners"}


@given(st.floats(1e-4, 1e-2))
def test_tiny_box_area_shrinks(eps):
    region = project_box(box(0, "dot", (0.2, 5, 0.1), (eps, eps, eps)), cam_at())
    assert region is not None
    # margin-only growth: 1.2x the pinhole side, plus a little perspective spread
    assert region.area < (1.1 * 1.2 * 500 * eps / (5 - eps)) ** 2


@given(st.tuples(st.floats(-6, 6), st.floats(0.5, 12), st.floats(-6, 6)), st.floats(0.1, 5))
def test_rect_always_inside_image(center, size):
    region = project_box(box(0, "a", center, (size, size, size)), cam_at())
    if region is not None:
        x0, y0, x1, y1 = region.rect
        assert 0 <= x0 < x1 <= 640 and 0 <= y0 < y1 <= 640
        assert region.visible_corners >= 2
