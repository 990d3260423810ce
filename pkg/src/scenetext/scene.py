"""Scene domain types and scene/prior file ingestion.

Scene frame convention: +z is up, units are meters. Object ``size`` holds the
full box extents along the scene x, y and z axes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from .errors import SchemaError, ValidationError
from .fileio import read_json, write_json

UNIT_TOL = 1e-6
ORTHO_TOL = 1e-3


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Vec3":
        if len(values) != 3:
            raise SchemaError(f"expected 3 components, got {len(values)}")
        vec = cls(*(float(v) for v in values))
        if not all(math.isfinite(c) for c in vec):
            raise ValidationError(f"non-finite vector {list(values)}")
        return vec

    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class SceneObject:
    id: int
    label: str
    centroid: Vec3
    size: Vec3
    orientation: tuple[float, float, float, float] | None = None  # (x, y, z, w)

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id < 0:
            raise ValidationError(f"object id must be a non-negative integer, got {self.id!r}")
        if not self.label:
            raise ValidationError(f"object {self.id}: empty label")
        if not all(math.isfinite(s) and s > 0 for s in self.size):
            raise ValidationError(f"object {self.id}: non-positive size {tuple(self.size)}")
        if self.orientation is not None:
            q = self.orientation
            if len(q) != 4 or abs(math.sqrt(sum(c * c for c in q)) - 1.0) > 1e-3:
                raise ValidationError(f"object {self.id}: orientation must be a unit quaternion")

    @property
    def max_extent(self) -> float:
        return max(self.size)


@dataclass(frozen=True)
class CameraPose:
    position: Vec3
    forward: Vec3
    up: Vec3
    intrinsics: tuple[float, float, float, float] | None = None  # fx, fy, cx, cy
    image_size: tuple[int, int] | None = None  # width, height

    def __post_init__(self) -> None:
        if abs(self.forward.norm() - 1.0) > UNIT_TOL:
            raise ValidationError(f"camera forward is not a unit vector: {tuple(self.forward)}")
        if abs(self.up.norm() - 1.0) > UNIT_TOL:
            raise ValidationError(f"camera up is not a unit vector: {tuple(self.up)}")
        if abs(float(np.dot(self.forward, self.up))) >= ORTHO_TOL:
            raise ValidationError("camera forward and up are not orthogonal")
        if (self.intrinsics is None) != (self.image_size is None):
            raise ValidationError("camera intrinsics and image_size must be given together")
        if self.image_size is not None and min(self.image_size) <= 0:
            raise ValidationError(f"invalid image size {self.image_size}")

    @property
    def has_intrinsics(self) -> bool:
        return self.intrinsics is not None


@dataclass(frozen=True)
class View:
    frame_id: str
    camera: CameraPose
    image: str | None = None


@dataclass(frozen=True)
class Scene:
    scene_id: str
    objects: tuple[SceneObject, ...]
    camera: CameraPose
    views: tuple[View, ...] = ()

    def __post_init__(self) -> None:
        if not self.objects:
            raise ValidationError(f"scene {self.scene_id!r} has no objects")
        seen: set[int] = set()
        for obj in self.objects:
            if obj.id in seen:
                raise ValidationError(f"duplicate object id {obj.id}")
            seen.add(obj.id)
        ordered = tuple(sorted(self.objects, key=lambda o: o.id))
        object.__setattr__(self, "objects", ordered)

    def object(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    @property
    def labels(self) -> dict[int, str]:
        return {o.id: o.label for o in self.objects}


@dataclass(frozen=True)
class PriorRule:
    subject_label: str
    object_label: str
    relation: str
    symmetric: bool = False

    def __post_init__(self) -> None:
        if not self.relation.strip():
            raise ValidationError("prior relation must be non-empty")


@dataclass(frozen=True)
class PriorTable:
    rules: tuple[PriorRule, ...] = ()
    _index: dict[tuple[str, str], str] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        for rule in self.rules:
            key = (rule.subject_label, rule.object_label)
            if key in seen:
                raise ValidationError(f"duplicate prior rule for {key}")
            seen.add(key)
        # exact-order rules win over symmetric mirrors
        for rule in self.rules:
            if rule.symmetric:
                self._index.setdefault((rule.object_label, rule.subject_label), rule.relation)
        for rule in self.rules:
            self._index[(rule.subject_label, rule.object_label)] = rule.relation

    def lookup(self, subject_label: str, object_label: str) -> str | None:
        return self._index.get((subject_label, object_label))

    def __len__(self) -> int:
        return len(self.rules)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def normalize_label(raw: Any) -> str:
    if not isinstance(raw, str):
        raise SchemaError(f"label must be a string, got {type(raw).__name__}")
    label = "_".join(raw.strip().lower().split())
    if not label:
        raise ValidationError("empty label")
    if not label.isascii():
        raise ValidationError(f"label {raw!r} is not ASCII")
    return label


def _require(data: dict, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(data, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in data:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"{where}.{key}: wrong type {type(value).__name__}")
    return value


def _vec(data: dict, key: str, where: str) -> Vec3:
    raw = _require(data, key, list, where)
    if len(raw) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
        raise SchemaError(f"{where}.{key}: expected [x, y, z] numbers")
    return Vec3.of(raw)


def camera_from_dict(data: dict, where: str = "camera") -> CameraPose:
    intrinsics = None
    image_size = None
    if data.get("intrinsics") is not None:
        raw = data["intrinsics"]
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}.intrinsics: expected an object")
        intrinsics = tuple(float(_require(raw, k, (int, float), f"{where}.intrinsics")) for k in ("fx", "fy", "cx", "cy"))
    if data.get("image_size") is not None:
        raw = data["image_size"]
        if not isinstance(raw, list) or len(raw) != 2 or not all(isinstance(v, int) for v in raw):
            raise SchemaError(f"{where}.image_size: expected [width, height] integers")
        image_size = (raw[0], raw[1])
    return CameraPose(
        position=_vec(data, "position", where),
        forward=_vec(data, "forward", where),
        up=_vec(data, "up", where),
        intrinsics=intrinsics,  # type: ignore[arg-type]
        image_size=image_size,
    )


def camera_to_dict(cam: CameraPose) -> dict:
    out: dict[str, Any] = {
        "position": list(cam.position),
        "forward": list(cam.forward),
        "up": list(cam.up),
    }
    if cam.intrinsics is not None:
        out["intrinsics"] = dict(zip(("fx", "fy", "cx", "cy"), cam.intrinsics))
        out["image_size"] = list(cam.image_size)  # type: ignore[arg-type]
    return out


def object_from_dict(data: dict, where: str) -> SceneObject:
    oid = _require(data, "id", int, where)
    orientation = None
    if data.get("orientation") is not None:
        raw = data["orientation"]
        if not isinstance(raw, list) or len(raw) != 4:
            raise SchemaError(f"{where}.orientation: expected [x, y, z, w]")
        orientation = tuple(float(v) for v in raw)
    return SceneObject(
        id=oid,
        label=normalize_label(_require(data, "label", str, where)),
        centroid=_vec(data, "centroid", where),
        size=_vec(data, "size", where),
        orientation=orientation,  # type: ignore[arg-type]
    )


def object_to_dict(obj: SceneObject) -> dict:
    out: dict[str, Any] = {
        "id": obj.id,
        "label": obj.label,
        "centroid": list(obj.centroid),
        "size": list(obj.size),
    }
    if obj.orientation is not None:
        out["orientation"] = list(obj.orientation)
    return out


def scene_from_dict(data: Any) -> Scene:
    if not isinstance(data, dict):
        raise SchemaError("scene file must contain a JSON object")
    scene_id = _require(data, "scene_id", str, "scene")
    camera = camera_from_dict(_require(data, "camera", dict, "scene"), "camera")
    raw_objects = _require(data, "objects", list, "scene")
    objects = tuple(object_from_dict(o, f"objects[{i}]") for i, o in enumerate(raw_objects))
    views = []
    for i, raw in enumerate(data.get("views") or []):
        where = f"views[{i}]"
        frame_id = _require(raw, "frame_id", (str, int), where)
        views.append(
            View(
                frame_id=str(frame_id),
                camera=camera_from_dict(_require(raw, "camera", dict, where), f"{where}.camera"),
                image=raw.get("image"),
            )
        )
    return Scene(scene_id=scene_id, objects=objects, camera=camera, views=tuple(views))


def scene_to_dict(scene: Scene) -> dict:
    out: dict[str, Any] = {
        "scene_id": scene.scene_id,
        "camera": camera_to_dict(scene.camera),
        "objects": [object_to_dict(o) for o in scene.objects],
    }
    if scene.views:
        out["views"] = [
            {"frame_id": v.frame_id, "camera": camera_to_dict(v.camera), "image": v.image}
            for v in scene.views
        ]
    return out


def load_scene(path: str | os.PathLike) -> Scene:
    return scene_from_dict(read_json(path))


def save_scene(scene: Scene, path: str | os.PathLike) -> None:
    write_json(path, scene_to_dict(scene))


def priors_from_list(data: Any) -> PriorTable:
    if not isinstance(data, list):
        raise SchemaError("prior table must be a JSON array")
    rules = []
    for i, raw in enumerate(data):
        where = f"priors[{i}]"
        symmetric = raw.get("symmetric", False) if isinstance(raw, dict) else False
        if not isinstance(symmetric, bool):
            raise SchemaError(f"{where}.symmetric: expected a boolean")
        rules.append(
            PriorRule(
                subject_label=normalize_label(_require(raw, "subject", str, where)),
                object_label=normalize_label(_require(raw, "object", str, where)),
                relation=_require(raw, "relation", str, where).strip(),
                symmetric=symmetric,
            )
        )
    return PriorTable(tuple(rules))


def priors_to_list(table: PriorTable) -> list[dict]:
    return [
        {"subject": r.subject_label, "object": r.object_label, "relation": r.relation, "symmetric": r.symmetric}
        for r in table.rules
    ]


def load_priors(path: str | os.PathLike | None) -> PriorTable:
    if path is None:
        return PriorTable()
    return priors_from_list(read_json(path))
