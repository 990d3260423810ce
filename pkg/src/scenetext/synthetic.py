"""Seeded synthetic scenes and matching offline fixture files.

The generator is the test-oracle source for the rest of the package: boxes
are axis-aligned, pairwise disjoint and contained in the room, and the main
camera sits at a room edge looking horizontally at the room center.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import PlacementError, ValidationError
from .scene import CameraPose, PriorRule, PriorTable, Scene, SceneObject, Vec3, View

LABELS = (
    "armchair", "bed", "bookshelf", "box", "cabinet", "chair", "desk", "door",
    "lamp", "monitor", "nightstand", "plant", "shelf", "sink", "sofa", "table",
    "toilet", "trash_can", "tv", "window",
)
COLORS = ("black", "white", "brown", "gray", "blue", "red", "green", "beige")
MATERIALS = ("wooden", "metal", "plastic", "leather", "fabric", "glass")

DEFAULT_ROOM = Vec3(10.0, 10.0, 3.0)
MAX_ATTEMPTS = 2000
SIZE_RANGE = (0.3, 1.5)


def default_priors() -> PriorTable:
    return PriorTable(
        (
            PriorRule("monitor", "desk", "on"),
            PriorRule("chair", "table", "tucked under"),
            PriorRule("nightstand", "bed", "beside", symmetric=True),
        )
    )


def _boxes_overlap(c1: np.ndarray, s1: np.ndarray, c2: np.ndarray, s2: np.ndarray) -> bool:
    return bool(np.all(np.abs(c1 - c2) < (s1 + s2) / 2.0))


def _edge_camera(rng: np.random.Generator, room: np.ndarray, intrinsics: bool) -> CameraPose:
    side = int(rng.integers(4))
    height = min(1.5, 0.5 * room[2])
    cx, cy = room[0] / 2.0, room[1] / 2.0
    position, forward = {
        0: ((cx, 0.0, height), (0.0, 1.0, 0.0)),
        1: ((room[0], cy, height), (-1.0, 0.0, 0.0)),
        2: ((cx, room[1], height), (0.0, -1.0, 0.0)),
        3: ((0.0, cy, height), (1.0, 0.0, 0.0)),
    }[side]
    kwargs = {}
    if intrinsics:
        kwargs = {"intrinsics": (500.0, 500.0, 320.0, 240.0), "image_size": (640, 480)}
    return CameraPose(Vec3.of(position), Vec3.of(forward), Vec3(0.0, 0.0, 1.0), **kwargs)


def _view_cameras(rng: np.random.Generator, room: np.ndarray, n_views: int) -> list[View]:
    views = []
    center = room / 2.0
    radius = 0.45 * min(room[0], room[1])
    for i in range(n_views):
        phi = 2.0 * math.pi * i / n_views + float(rng.uniform(-0.2, 0.2))
        pos = np.array([center[0] + radius * math.cos(phi), center[1] + radius * math.sin(phi), min(1.5, center[2])])
        fwd = np.array([center[0] - pos[0], center[1] - pos[1], 0.0])
        fwd /= np.linalg.norm(fwd)
        cam = CameraPose(
            Vec3.of(pos), Vec3.of(fwd), Vec3(0.0, 0.0, 1.0),
            intrinsics=(500.0, 500.0, 320.0, 240.0), image_size=(640, 480),
        )
        views.append(View(frame_id=f"frame_{i:03d}", camera=cam, image=f"frames/frame_{i:03d}.jpg"))
    return views


def generate_synthetic_scene(
    seed: int,
    n_objects: int,
    room_extent: Sequence[float] = DEFAULT_ROOM,
    n_views: int = 0,
) -> Scene:
    """Build a deterministic scene of ``n_objects`` disjoint boxes.

    Placement is plain rejection sampling with ``MAX_ATTEMPTS`` tries per
    object. Raises PlacementError when the room is too crowded.
    """
    if n_objects < 1:
        raise ValidationError("n_objects must be >= 1")
    room = np.asarray(room_extent, dtype=float)
    if room.shape != (3,) or not np.all(room > 0):
        raise ValidationError("room_extent components must be > 0")

    rng = np.random.default_rng(seed)
    centers: list[np.ndarray] = []
    sizes: list[np.ndarray] = []
    objects = []
    for oid in range(n_objects):
        label = LABELS[int(rng.integers(len(LABELS)))]
        for _ in range(MAX_ATTEMPTS):
            size = rng.uniform(*SIZE_RANGE, size=3)
            size = np.round(np.minimum(size, 0.9 * room), 4)
            center = np.round(rng.uniform(size / 2.0, room - size / 2.0), 4)
            inside = np.all(center - size / 2.0 >= 0) and np.all(center + size / 2.0 <= room)
            if inside and not any(_boxes_overlap(center, size, c, s) for c, s in zip(centers, sizes)):
                break
        else:
            raise PlacementError(f"could not place object {oid} after {MAX_ATTEMPTS} attempts")
        centers.append(center)
        sizes.append(size)
        objects.append(
            SceneObject(id=oid, label=label, centroid=Vec3.of(center), size=Vec3.of(size))
        )

    camera = _edge_camera(rng, room, intrinsics=n_views > 0)
    return Scene(
        scene_id=f"synthetic_{seed:06d}",
        objects=tuple(objects),
        camera=camera,
        views=tuple(_view_cameras(rng, room, n_views)),
    )


def synthetic_caption_candidates(scene: Scene, seed: int, per_object: int = 12) -> dict[int, list[str]]:
    """Brief caption candidates per object, as a stand-in for a captioner."""
    rng = np.random.default_rng([seed, 1])
    out: dict[int, list[str]] = {}
    for obj in scene.objects:
        name = obj.label.replace("_", " ")
        texts = set()
        while len(texts) < per_object:
            color = COLORS[int(rng.integers(len(COLORS)))]
            material = MATERIALS[int(rng.integers(len(MATERIALS)))]
            form = int(rng.integers(3))
            if form == 0:
                texts.add(f"a {color} {name}")
            elif form == 1:
                texts.add(f"a {color} {material} {name}")
            else:
                # some candidates miss the object entirely, like a real captioner
                other = LABELS[int(rng.integers(len(LABELS)))].replace("_", " ")
                texts.add(f"a {material} {other} in a room")
        out[obj.id] = sorted(texts)
    return out


def synthetic_crop_embeddings(scene: Scene, seed: int, embedder) -> dict[int, list[float]]:
    """Stand-in image-crop embeddings: the sentence embedding of a short true description."""
    rng = np.random.default_rng([seed, 2])
    out = {}
    for obj in scene.objects:
        color = COLORS[int(rng.integers(len(COLORS)))]
        out[obj.id] = embedder.embed_sentence(f"a {color} {obj.label.replace('_', ' ')}").tolist()
    return out


def synthetic_question(scene: Scene, seed: int) -> str:
    rng = np.random.default_rng([seed, 3])
    a, b = (scene.objects[int(i)] for i in rng.choice(len(scene.objects), size=2, replace=len(scene.objects) < 2))
    return f"What is to the left of the {b.label.replace('_', ' ')} near the {a.label.replace('_', ' ')}?"


def synthetic_image_text(scene: Scene, seed: int, n_visible: int = 15) -> str:
    """Labels of a random subset of objects, standing in for what a top-down render shows."""
    rng = np.random.default_rng([seed, 4])
    n = min(n_visible, len(scene.objects))
    picks = sorted(int(i) for i in rng.choice(len(scene.objects), size=n, replace=False))
    return " ".join(scene.objects[i].label.replace("_", " ") for i in picks)


def _jitter_box(rng: np.random.Generator, obj: SceneObject, sigma: float) -> dict:
    center = np.asarray(obj.centroid) + rng.normal(0.0, sigma, 3)
    size = np.asarray(obj.size) * rng.uniform(0.8, 1.2, 3)
    return {"center": np.round(center, 4).tolist(), "size": np.round(size, 4).tolist()}


def _box(obj: SceneObject) -> dict:
    return {"center": list(obj.centroid), "size": list(obj.size)}


def synthetic_predictions(scene: Scene, seed: int) -> list[dict]:
    """A mixed predictions file exercising every evaluation task."""
    rng = np.random.default_rng([seed, 5])
    objs = list(scene.objects)
    cands = synthetic_caption_candidates(scene, seed)
    records: list[dict] = []
    for obj in objs[:10]:
        records.append({"id": f"ground-{obj.id}", "task": "grounding", "pred": _jitter_box(rng, obj, 0.15), "gt": _box(obj)})
    for i in range(0, min(len(objs), 9), 3):
        group = objs[i : i + 3]
        pred = [_jitter_box(rng, o, 0.1) for o in group[: max(1, len(group) - int(rng.integers(2)))]]
        records.append({"id": f"multi-{i}", "task": "multi", "pred": pred, "gt": [_box(o) for o in group]})
    for obj in objs[:10]:
        texts = cands[obj.id]
        name = obj.label.replace("_", " ")
        records.append({"id": f"qa-{obj.id}", "task": "text", "pred": f"it is the {name}", "gt": [name]})
        records.append({"id": f"cap-{obj.id}", "task": "text", "pred": texts[0], "gt": texts[1:4]})
        records.append(
            {
                "id": f"dense-{obj.id}",
                "task": "dense",
                "pred": {"box": _jitter_box(rng, obj, 0.1), "caption": texts[0]},
                "gt": {"box": _box(obj), "captions": texts[1:4]},
            }
        )
    verbs = ("navigate to", "pick up", "place it on", "open", "wipe")
    for t in range(min(5, len(objs))):
        picks = [objs[int(i)] for i in rng.choice(len(objs), size=min(4, len(objs)), replace=False)]
        steps = [f"{k + 1}. {verbs[k % len(verbs)].capitalize()} the [{o.label}-{o.id}]" for k, o in enumerate(picks)]
        gt = "Tidy up the room.\n" + "\n".join(steps)
        pred_steps = steps[:-1] if t % 2 else steps
        records.append({"id": f"plan-{t}", "task": "plan", "pred": "\n".join(pred_steps), "gt": gt})
    return records
