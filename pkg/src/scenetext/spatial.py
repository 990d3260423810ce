"""Pairwise spatial-relation inference and scene-graph assembly.

All directions are camera-allocentric: "a is <tag> b" is read from the
camera's point of view, with ``r = a.centroid - b.centroid``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDirection, SchemaError, ValidationError
from .scene import CameraPose, PriorTable, Scene, SceneObject, Vec3

DEGENERATE_NORM = 1e-9
WORLD_UP = Vec3(0.0, 0.0, 1.0)


class Kind(str, Enum):
    PRIOR = "prior"
    NEARBY = "nearby"
    ABOVE = "above"
    BELOW = "below"
    IN_FRONT_OF = "in_front_of"
    BEHIND = "behind"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    OCLOCK = "oclock"


DIRECTIONAL = frozenset({Kind.ABOVE, Kind.BELOW, Kind.IN_FRONT_OF, Kind.BEHIND, Kind.LEFT_OF, Kind.RIGHT_OF, Kind.OCLOCK})
HORIZONTAL = frozenset({Kind.IN_FRONT_OF, Kind.BEHIND, Kind.LEFT_OF, Kind.RIGHT_OF, Kind.OCLOCK})
_OPPOSITES = ((Kind.IN_FRONT_OF, Kind.BEHIND), (Kind.LEFT_OF, Kind.RIGHT_OF), (Kind.ABOVE, Kind.BELOW))


@dataclass(frozen=True, order=True)
class RelationTag:
    kind: Kind
    hour: int | None = None  # OCLOCK only
    text: str | None = None  # PRIOR only

    def __post_init__(self) -> None:
        if self.kind is Kind.OCLOCK:
            if self.hour is None or not 1 <= self.hour <= 12:
                raise ValidationError(f"o'clock hour must be in [1, 12], got {self.hour}")
        if self.kind is Kind.PRIOR and not self.text:
            raise ValidationError("prior tag needs relation text")

    def __str__(self) -> str:
        if self.kind is Kind.OCLOCK:
            return f"oclock_{self.hour}"
        if self.kind is Kind.PRIOR:
            return f"prior:{self.text}"
        return self.kind.value

    @classmethod
    def parse(cls, raw: str) -> "RelationTag":
        if raw.startswith("prior:"):
            return cls(Kind.PRIOR, text=raw[len("prior:"):])
        if raw.startswith("oclock_"):
            try:
                return cls(Kind.OCLOCK, hour=int(raw[len("oclock_"):]))
            except ValueError:
                raise SchemaError(f"bad o'clock tag {raw!r}") from None
        try:
            kind = Kind(raw)
        except ValueError:
            raise SchemaError(f"unknown relation tag {raw!r}") from None
        if kind in (Kind.OCLOCK, Kind.PRIOR):
            raise SchemaError(f"incomplete relation tag {raw!r}")
        return cls(kind)


NEARBY = RelationTag(Kind.NEARBY)


@dataclass(frozen=True)
class RelationTriplet:
    subject_id: int
    object_id: int
    tags: frozenset[RelationTag]
    distance_m: float
    theta_deg: float | None = None

    def __post_init__(self) -> None:
        if self.subject_id == self.object_id:
            raise ValidationError("relation subject and object must differ")
        if not self.tags:
            raise ValidationError("relation needs at least one tag")
        kinds = self.kinds
        if kinds & HORIZONTAL and self.theta_deg is None:
            raise ValidationError("horizontal tags require theta_deg")
        for a, b in _OPPOSITES:
            if a in kinds and b in kinds:
                raise ValidationError(f"contradictory tags {a.value} and {b.value}")

    @property
    def kinds(self) -> frozenset[Kind]:
        return frozenset(t.kind for t in self.tags)

    @property
    def key(self) -> tuple[int, int]:
        return (self.subject_id, self.object_id)

    def tag(self, kind: Kind) -> RelationTag | None:
        for t in self.tags:
            if t.kind is kind:
                return t
        return None

    def sorted_tags(self) -> list[str]:
        return sorted(str(t) for t in self.tags)

    def to_dict(self) -> dict:
        out = {
            "subject": self.subject_id,
            "object": self.object_id,
            "tags": self.sorted_tags(),
            "distance_m": self.distance_m,
        }
        if self.theta_deg is not None:
            out["theta_deg"] = self.theta_deg
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RelationTriplet":
        try:
            return cls(
                subject_id=int(data["subject"]),
                object_id=int(data["object"]),
                tags=frozenset(RelationTag.parse(t) for t in data["tags"]),
                distance_m=float(data["distance_m"]),
                theta_deg=None if data.get("theta_deg") is None else float(data["theta_deg"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed relation record: {exc}") from exc


class VerticalAxis(str, Enum):
    CAMERA_UP = "camera_up"
    WORLD_UP = "world_up"


@dataclass(frozen=True)
class ReasonerConfig:
    beta: float = 1.0
    theta_tol_deg: float = 30.0
    n_sectors: int = 12
    saliency_m: int = 5
    nearby_exclusive: bool = True
    vertical_axis: VerticalAxis = VerticalAxis.CAMERA_UP
    world_up: Vec3 = field(default=WORLD_UP)

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValidationError("beta must be > 0")
        if not 0 < self.theta_tol_deg < 90:
            raise ValidationError("theta_tol_deg must be in (0, 90)")
        if self.n_sectors < 4:
            raise ValidationError("n_sectors must be >= 4")
        if self.saliency_m < 1:
            raise ValidationError("saliency_m must be >= 1")
        object.__setattr__(self, "vertical_axis", VerticalAxis(self.vertical_axis))
        if abs(Vec3.of(self.world_up).norm() - 1.0) > 1e-6:
            raise ValidationError("world_up must be a unit vector")


# ---------------------------------------------------------------------------
# geometry primitives
# ---------------------------------------------------------------------------


def euclidean_distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b, strict=True)))


def is_nearby(a: SceneObject, b: SceneObject, beta: float) -> bool:
    """Proximity test against ``beta`` times the largest extent of either box."""
    threshold = beta * max(a.max_extent, b.max_extent)
    return euclidean_distance(a.centroid, b.centroid) < threshold


def horizontal_angle(r: Sequence[float], cam: CameraPose) -> float:
    """Clockwise angle in degrees, seen from above, from camera forward to ``r``.

    Both ``r`` and the forward vector are projected onto the plane orthogonal
    to ``cam.up`` first. 0 is straight ahead, 90 is to the camera's right.
    """
    up = np.asarray(cam.up, dtype=float)
    r = np.asarray(r, dtype=float)
    r_h = r - np.dot(r, up) * up
    if np.linalg.norm(r_h) <= DEGENERATE_NORM:
        raise DegenerateDirection("relative direction is parallel to the camera up axis")
    fwd = np.asarray(cam.forward, dtype=float)
    fwd = fwd - np.dot(fwd, up) * up
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    theta = math.degrees(math.atan2(float(np.dot(r_h, right)), float(np.dot(r_h, fwd)))) % 360.0
    return 0.0 if theta >= 360.0 else theta


def sector_label(theta: float, n_sectors: int = 12) -> int:
    """Map a horizontal angle to a clock hour (12 = straight ahead).

    The angle is first snapped to the nearest of ``n_sectors`` sector
    centers, then read off a 12-hour dial.
    """
    width = 360.0 / n_sectors
    snapped = (math.floor(theta / width + 0.5) % n_sectors) * width
    hour = math.floor(snapped / 30.0 + 0.5) % 12
    return 12 if hour == 0 else hour


def _horizontal_tag(theta: float, tol: float) -> RelationTag | None:
    if min(theta, 360.0 - theta) < tol:
        return RelationTag(Kind.IN_FRONT_OF)
    if abs(theta - 180.0) < tol:
        return RelationTag(Kind.BEHIND)
    if tol < theta < 180.0 - tol:
        return RelationTag(Kind.RIGHT_OF)
    if 180.0 + tol < theta < 360.0 - tol:
        return RelationTag(Kind.LEFT_OF)
    return None


def _up_axis(cam: CameraPose, cfg: ReasonerConfig) -> np.ndarray:
    if cfg.vertical_axis is VerticalAxis.WORLD_UP:
        return np.asarray(cfg.world_up, dtype=float)
    return np.asarray(cam.up, dtype=float)


def relate_pair(
    a: SceneObject,
    b: SceneObject,
    cam: CameraPose,
    priors: PriorTable,
    cfg: ReasonerConfig = ReasonerConfig(),
) -> RelationTriplet:
    """Relation of ``a`` with respect to ``b`` from the camera viewpoint."""
    if a.id == b.id:
        raise ValidationError("cannot relate an object to itself")
    distance = euclidean_distance(a.centroid, b.centroid)

    prior = priors.lookup(a.label, b.label)
    if prior is not None:
        return RelationTriplet(a.id, b.id, frozenset({RelationTag(Kind.PRIOR, text=prior)}), distance)

    tags: set[RelationTag] = set()
    if is_nearby(a, b, cfg.beta):
        tags.add(NEARBY)
        if cfg.nearby_exclusive:
            return RelationTriplet(a.id, b.id, frozenset(tags), distance)

    r = a.centroid.array() - b.centroid.array()
    vertical = float(np.dot(r, _up_axis(cam, cfg)))
    if vertical > 0:
        tags.add(RelationTag(Kind.ABOVE))
    elif vertical < 0:
        tags.add(RelationTag(Kind.BELOW))

    theta = None
    try:
        theta = horizontal_angle(r, cam)
    except DegenerateDirection:
        pass
    if theta is not None:
        horizontal = _horizontal_tag(theta, cfg.theta_tol_deg)
        if horizontal is not None:
            tags.add(horizontal)
        tags.add(RelationTag(Kind.OCLOCK, hour=sector_label(theta, cfg.n_sectors)))

    if not tags:
        # coincident centroids with nearby suppressed: nothing directional to say
        tags.add(NEARBY)
    return RelationTriplet(a.id, b.id, frozenset(tags), distance, theta)


# ---------------------------------------------------------------------------
# scene graph
# ---------------------------------------------------------------------------


def salient_pairs(scene: Scene, priors: PriorTable, saliency_m: int) -> list[tuple[int, int]]:
    """Ordered pairs kept by nearest-neighbor pruning plus all prior matches.

    Each object keeps its ``saliency_m`` nearest neighbors by centroid
    distance (ties broken by id); every kept neighbor relation is emitted in
    both directions.
    """
    objs = scene.objects
    if len(objs) < 2:
        return []
    centers = np.array([o.centroid for o in objs], dtype=float)
    ids = [o.id for o in objs]
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    pairs: set[tuple[int, int]] = set()
    for i in range(len(objs)):
        order = sorted((j for j in range(len(objs)) if j != i), key=lambda j: (dist[i, j], ids[j]))
        for j in order[:saliency_m]:
            pairs.add((ids[i], ids[j]))
            pairs.add((ids[j], ids[i]))
    if len(priors):
        for a in objs:
            for b in objs:
                if a.id != b.id and priors.lookup(a.label, b.label) is not None:
                    pairs.add((a.id, b.id))
    return sorted(pairs)


def build_scene_graph(
    scene: Scene,
    priors: PriorTable,
    cfg: ReasonerConfig = ReasonerConfig(),
    jobs: int = 1,
) -> list[RelationTriplet]:
    pairs = salient_pairs(scene, priors, cfg.saliency_m)
    by_id = {o.id: o for o in scene.objects}

    def one(pair: tuple[int, int]) -> RelationTriplet:
        return relate_pair(by_id[pair[0]], by_id[pair[1]], scene.camera, priors, cfg)

    if jobs > 1 and len(pairs) > 256:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            triplets = list(pool.map(one, pairs))
    else:
        triplets = [one(p) for p in pairs]
    return sorted(triplets, key=lambda t: t.key)


def graph_to_list(graph: Iterable[RelationTriplet]) -> list[dict]:
    return [t.to_dict() for t in graph]


def graph_from_list(data: object) -> list[RelationTriplet]:
    if not isinstance(data, list):
        raise SchemaError("relation graph file must be a JSON array")
    return sorted((RelationTriplet.from_dict(d) for d in data), key=lambda t: t.key)
