"""Three-part textual scene description and its expression modes.

Object mentions use the ``[label-id]`` form throughout so downstream plans
and answers can reference objects unambiguously.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .captions import ObjectCaption, caption_from_dict, caption_to_dict
from .errors import MissingCaption, SchemaError, UnknownId, ValidationError
from .scene import Scene
from .spatial import Kind, RelationTriplet

SYSTEM_MESSAGE_VERSION = "v1"
SYSTEM_MESSAGES = {
    "v1": (
        "You are an assistant that understands 3D indoor scenes from text. "
        "Objects are referenced as [label-id]. The object captions describe "
        "the attributes of each object. The spatial relationships describe "
        "where objects are relative to each other as seen from the camera "
        "viewpoint; o'clock directions are measured clockwise with 12 o'clock "
        "straight ahead. Answer using only this scene information."
    ),
}
SYSTEM_MESSAGE = SYSTEM_MESSAGES[SYSTEM_MESSAGE_VERSION]

CAPTIONS_HEADER = "Object captions:"
RELATIONS_HEADER = "Spatial relationships:"


class Mode(str, Enum):
    COORDINATE = "coordinate"
    SIMPLE = "simple"
    COMPLEX = "complex"


_PHRASES = {
    Kind.NEARBY: "near",
    Kind.ABOVE: "above",
    Kind.BELOW: "below",
    Kind.IN_FRONT_OF: "in front of",
    Kind.BEHIND: "behind",
    Kind.LEFT_OF: "to the left of",
    Kind.RIGHT_OF: "to the right of",
}
_HORIZONTAL_ORDER = (Kind.IN_FRONT_OF, Kind.BEHIND, Kind.LEFT_OF, Kind.RIGHT_OF)
_VERTICAL_ORDER = (Kind.ABOVE, Kind.BELOW)


@dataclass(frozen=True)
class RelationSentence:
    subject_id: int
    object_id: int | None  # None for per-object coordinate sentences
    text: str
    triplet: RelationTriplet | None = None


@dataclass(frozen=True)
class SceneInformation:
    system_message: str
    object_captions: tuple[ObjectCaption, ...]
    relation_sentences: tuple[RelationSentence, ...]
    mode: Mode
    labels: Mapping[int, str] = field(default_factory=dict)
    scene_id: str = ""
    token_estimate: int = 0

    def __post_init__(self) -> None:
        ids = [c.object_id for c in self.object_captions]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise ValidationError("captions must be unique and ordered by object id")
        known = set(ids)
        keys = []
        for rel in self.relation_sentences:
            for oid in (rel.subject_id, rel.object_id):
                if oid is not None and oid not in known:
                    raise MissingCaption(f"relation references object {oid} without a caption")
            keys.append((rel.subject_id, -1 if rel.object_id is None else rel.object_id))
        if keys != sorted(keys):
            raise ValidationError("relation sentences must be ordered by (subject, object)")
        object.__setattr__(self, "token_estimate", count_tokens(render_text(self)))

    def caption(self, object_id: int) -> ObjectCaption:
        for cap in self.object_captions:
            if cap.object_id == object_id:
                return cap
        raise UnknownId(object_id)

    def mention(self, object_id: int) -> str:
        return mention(self.labels.get(object_id, "object"), object_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "system_message": self.system_message,
            "captions": [caption_to_dict(c, self.labels.get(c.object_id)) for c in self.object_captions],
            "relations": [_relation_to_dict(r) for r in self.relation_sentences],
            "mode": self.mode.value,
            "token_estimate": self.token_estimate,
        }

    @classmethod
    def from_dict(cls, data: Any) -> "SceneInformation":
        if not isinstance(data, dict):
            raise SchemaError("scene information file must contain a JSON object")
        try:
            captions = [caption_from_dict(c) for c in data["captions"]]
            labels = {int(c["object_id"]): str(c.get("label", "object")) for c in data["captions"]}
            relations = [_relation_from_dict(r) for r in data["relations"]]
            return cls(
                system_message=str(data["system_message"]),
                object_captions=tuple(captions),
                relation_sentences=tuple(relations),
                mode=Mode(data["mode"]),
                labels=labels,
                scene_id=str(data.get("scene_id", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise SchemaError(f"malformed scene information: {exc}") from exc


def _relation_to_dict(rel: RelationSentence) -> dict[str, Any]:
    out: dict[str, Any] = {"subject": rel.subject_id, "object": rel.object_id, "text": rel.text}
    if rel.triplet is not None:
        out["triplet"] = rel.triplet.to_dict()
    return out


def _relation_from_dict(data: dict) -> RelationSentence:
    triplet = RelationTriplet.from_dict(data["triplet"]) if data.get("triplet") else None
    obj = data.get("object")
    return RelationSentence(int(data["subject"]), None if obj is None else int(obj), str(data["text"]), triplet)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def mention(label: str, object_id: int) -> str:
    return f"the {label.replace('_', ' ')} [{label}-{object_id}]"


def _sentence(text: str) -> str:
    text = text.strip()
    text = text[0].upper() + text[1:]
    return text if text.endswith((".", "!", "?")) else text + "."


def _join(parts: Sequence[str]) -> str:
    if len(parts) <= 1:
        return "".join(parts)
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def render_coordinates(scene: Scene, object_id: int) -> str:
    obj = scene.object(object_id)
    x, y, z = obj.centroid
    w, h, l = obj.size
    return _sentence(
        f"{mention(obj.label, obj.id)} is at ({x:.2f}, {y:.2f}, {z:.2f}) with size ({w:.2f}, {h:.2f}, {l:.2f})"
    )


def _simple_phrase(t: RelationTriplet) -> str:
    for kind in (Kind.NEARBY, *_HORIZONTAL_ORDER, *_VERTICAL_ORDER):
        if kind in t.kinds:
            return _PHRASES[kind]
    clock = t.tag(Kind.OCLOCK)
    assert clock is not None, "triplet without any renderable tag"
    return f"at {clock.hour} o'clock from"


def _complex_phrase(t: RelationTriplet) -> str:
    parts = [_PHRASES[k] for k in (Kind.NEARBY, *_VERTICAL_ORDER, *_HORIZONTAL_ORDER) if k in t.kinds]
    clock = t.tag(Kind.OCLOCK)
    if parts:
        return _join(parts)
    assert clock is not None, "triplet without any renderable tag"
    return f"at {clock.hour} o'clock from"


def render_relation(
    t: RelationTriplet,
    labels: Mapping[int, str],
    mode: Mode | str,
    scene: Scene | None = None,
) -> str:
    """Render one relation as a fixed-template English sentence.

    Coordinate mode ignores the relation and describes the subject's box
    (``scene`` is required). A semantic-prior relation is rendered verbatim
    in every mode.
    """
    mode = Mode(mode)
    for oid in (t.subject_id, t.object_id):
        if oid not in labels:
            raise UnknownId(f"unknown object id {oid}")
    if mode is Mode.COORDINATE:
        if scene is None:
            raise ValidationError("coordinate mode needs the scene")
        return render_coordinates(scene, t.subject_id)

    subj = mention(labels[t.subject_id], t.subject_id)
    obj = mention(labels[t.object_id], t.object_id)
    prior = t.tag(Kind.PRIOR)
    if prior is not None:
        return _sentence(f"{subj} is {prior.text} {obj}")
    if mode is Mode.SIMPLE:
        return _sentence(f"{subj} is {_simple_phrase(t)} {obj}")

    phrase = _complex_phrase(t)
    extras = []
    clock = t.tag(Kind.OCLOCK)
    if clock is not None and not phrase.startswith("at "):
        extras.append(f"at {clock.hour} o'clock")
    extras.append(f"about {t.distance_m:.1f} m away")
    return _sentence(f"{subj} is {phrase} {obj}, " + ", ".join(extras))


def caption_line(label: str, caption: ObjectCaption) -> str:
    return f"[{label}-{caption.object_id}] " + _sentence(caption.text)


def render_text(info: SceneInformation, caption_ids: Iterable[int] | None = None, relations: Iterable[RelationSentence] | None = None) -> str:
    """Flat text rendering: system message, captions, relations, blank-line separated."""
    keep = None if caption_ids is None else set(caption_ids)
    cap_lines = [
        caption_line(info.labels.get(c.object_id, "object"), c)
        for c in info.object_captions
        if keep is None or c.object_id in keep
    ]
    rel_lines = [r.text for r in (info.relation_sentences if relations is None else relations)]
    sections = [info.system_message, "\n".join([CAPTIONS_HEADER, *cap_lines])]
    sections.append("\n".join([RELATIONS_HEADER, *rel_lines]))
    return "\n\n".join(sections) + "\n"


def count_tokens(text: str) -> int:
    return len(text.split())


def build_scene_information(
    scene: Scene,
    graph: Sequence[RelationTriplet],
    captions: Sequence[ObjectCaption],
    mode: Mode | str,
    system_message: str = SYSTEM_MESSAGE,
) -> SceneInformation:
    mode = Mode(mode)
    by_id = {c.object_id: c for c in captions}
    labels = scene.labels
    for t in graph:
        for oid in (t.subject_id, t.object_id):
            if oid not in labels:
                raise UnknownId(f"graph references unknown object {oid}")
            if oid not in by_id:
                raise MissingCaption(f"no caption for object {oid}")

    ordered_caps = tuple(by_id[oid] for oid in sorted(by_id) if oid in labels)
    if mode is Mode.COORDINATE:
        sentences = tuple(
            RelationSentence(c.object_id, None, render_coordinates(scene, c.object_id)) for c in ordered_caps
        )
    else:
        sentences = tuple(
            RelationSentence(t.subject_id, t.object_id, render_relation(t, labels, mode), t)
            for t in sorted(graph, key=lambda t: t.key)
        )
    return SceneInformation(
        system_message=system_message,
        object_captions=ordered_caps,
        relation_sentences=sentences,
        mode=mode,
        labels={c.object_id: labels[c.object_id] for c in ordered_caps},
        scene_id=scene.scene_id,
    )


def with_updates(
    info: SceneInformation,
    captions: Mapping[int, ObjectCaption] | None = None,
    relations: Mapping[tuple[int, int | None], RelationSentence] | None = None,
) -> SceneInformation:
    """Copy of ``info`` with some captions or relation sentences swapped out."""
    captions = captions or {}
    relations = relations or {}
    new_caps = tuple(captions.get(c.object_id, c) for c in info.object_captions)
    new_rels = tuple(relations.get((r.subject_id, r.object_id), r) for r in info.relation_sentences)
    return replace(info, object_captions=new_caps, relation_sentences=new_rels)
