"""Pinhole projection of object boxes into posed views and crop selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .scene import CameraPose, SceneObject, View

CROP_MARGIN = 0.10
MIN_VISIBLE_CORNERS = 2
MAX_VIEWS = 5


@dataclass(frozen=True)
class CropRegion:
    object_id: int
    frame_id: str
    rect: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max in pixels
    visible_corners: int
    mean_depth_m: float
    image: str | None = None

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    def to_dict(self) -> dict:
        out = {
            "object_id": self.object_id,
            "frame_id": self.frame_id,
            "rect": [round(v, 3) for v in self.rect],
            "visible_corners": self.visible_corners,
        }
        if self.image is not None:
            out["image"] = self.image
        return out


def quaternion_matrix(q: Sequence[float] | None) -> np.ndarray:
    """Rotation matrix for an (x, y, z, w) quaternion; identity when absent."""
    if q is None:
        return np.eye(3)
    x, y, z, w = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def box_corners(obj: SceneObject) -> np.ndarray:
    half = np.asarray(obj.size, dtype=float) / 2.0
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    local = signs * half
    return local @ quaternion_matrix(obj.orientation).T + np.asarray(obj.centroid, dtype=float)


def world_to_camera(cam: CameraPose) -> np.ndarray:
    """Rows are the camera axes in world coordinates (x right, y down, z forward)."""
    fwd = np.asarray(cam.forward, dtype=float)
    up = np.asarray(cam.up, dtype=float)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd])


def project_points(points: np.ndarray, cam: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates and camera-frame depths of world points."""
    if cam.intrinsics is None:
        raise ValidationError("view has no intrinsics")
    fx, fy, cx, cy = cam.intrinsics
    pc = (points - np.asarray(cam.position, dtype=float)) @ world_to_camera(cam).T
    depth = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * pc[:, 0] / depth + cx
        v = fy * pc[:, 1] / depth + cy
    return np.stack([u, v], axis=1), depth


def project_box(obj: SceneObject, view: CameraPose | View) -> CropRegion | None:
    """Crop rectangle of ``obj`` in one view, or None when it is not visible.

    Corners behind the camera are dropped; at least two corners must land in
    the image. The rectangle around the in-image corners is grown by 10% of
    its size per side and clipped to the image.
    """
    frame_id, image, cam = ("", None, view) if isinstance(view, CameraPose) else (view.frame_id, view.image, view.camera)
    if cam.intrinsics is None or cam.image_size is None:
        raise ValidationError("view has no intrinsics")
    width, height = cam.image_size
    pix, depth = project_points(box_corners(obj), cam)
    front = depth > 0
    inside = front & (pix[:, 0] >= 0) & (pix[:, 0] <= width) & (pix[:, 1] >= 0) & (pix[:, 1] <= height)
    count = int(inside.sum())
    if count < MIN_VISIBLE_CORNERS:
        return None
    pts = pix[inside]
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    mx, my = CROP_MARGIN * (x1 - x0), CROP_MARGIN * (y1 - y0)
    rect = (
        float(max(0.0, x0 - mx)),
        float(max(0.0, y0 - my)),
        float(min(width, x1 + mx)),
        float(min(height, y1 + my)),
    )
    if rect[0] >= rect[2] or rect[1] >= rect[3]:
        return None
    return CropRegion(obj.id, frame_id, rect, count, float(depth[inside].mean()), image)


def select_views(obj: SceneObject, views: Sequence[View], max_views: int = MAX_VIEWS) -> list[CropRegion]:
    if max_views < 1:
        raise ValidationError("max_views must be >= 1")
    regions = [r for r in (project_box(obj, v) for v in views) if r is not None]
    regions.sort(key=lambda r: (-r.visible_corners, -r.area, r.frame_id))
    return regions[:max_views]


def crop_manifest(objects: Sequence[SceneObject], views: Sequence[View], max_views: int = MAX_VIEWS) -> list[dict]:
    return [r.to_dict() for obj in objects for r in select_views(obj, views, max_views)]
