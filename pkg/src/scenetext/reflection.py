"""Score-and-replace refinement pass over captions and relation sentences.

Every caption is checked with a multiple-choice identification question
(when ground-truth labels are available) or a direct quality score; every
relation sentence is scored directly. Items scoring below ``tau`` are handed
to a corrector. All scores are collected before any replacement is applied,
so results do not depend on evaluation order.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping, Sequence

from .captions import ObjectCaption, fallback_caption
from .errors import ProviderError, ValidationError
from .providers import DEFAULT_IN_FLIGHT, Corrector, Judge, map_bounded
from .scene import PriorTable, Scene
from .sceneinfo import Mode, RelationSentence, SceneInformation, render_coordinates, render_relation, with_updates
from .spatial import ReasonerConfig, RelationTriplet, relate_pair

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.5
MAX_ROUNDS = 3


class ItemKind(str, Enum):
    CAPTION = "caption"
    RELATION = "relation"


@dataclass(frozen=True)
class ReflectionReport:
    item_id: str
    kind: ItemKind
    score: float
    replaced: bool
    old_text: str
    new_text: str
    round: int = 1
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "item_id": self.item_id,
            "kind": self.kind.value,
            "score": self.score,
            "replaced": self.replaced,
            "old_text": self.old_text,
            "new_text": self.new_text,
            "round": self.round,
        }
        if self.error:
            out["error"] = self.error
        return out


def relation_key(rel: RelationSentence) -> str:
    return f"{rel.subject_id}" if rel.object_id is None else f"{rel.subject_id}-{rel.object_id}"


def _search(label: str, text: str) -> re.Match | None:
    phrase = re.escape(label.replace("_", " "))
    return re.search(rf"\b{phrase}\b", text.lower().replace("_", " "))


def _label_in(label: str, text: str) -> bool:
    return _search(label, text) is not None


def identification_prompt(caption: str, choices: Sequence[str]) -> str:
    options = " ".join(f"({i}) {c.replace('_', ' ')}" for i, c in enumerate(choices))
    return f'Which object does this describe? "{caption}" Options: {options}. Answer with the option number.'


# ---------------------------------------------------------------------------
# offline providers
# ---------------------------------------------------------------------------


class OfflineJudge:
    """Rule-based judge.

    A caption passes iff it names the object's label. A relation passes iff
    re-running the spatial reasoner reproduces its tags and its sentence.
    """

    def __init__(self, scene: Scene, priors: PriorTable, cfg: ReasonerConfig = ReasonerConfig()) -> None:
        self.scene = scene
        self.priors = priors
        self.cfg = cfg
        self._by_id = {o.id: o for o in scene.objects}

    def recompute(self, subject_id: int, object_id: int) -> RelationTriplet:
        return relate_pair(self._by_id[subject_id], self._by_id[object_id], self.scene.camera, self.priors, self.cfg)

    def choose(self, prompt: str, choices: Sequence[str], context: dict[str, Any]) -> int:
        text = context.get("text", "")
        hits = [(m.start(), -len(c), i) for i, c in enumerate(choices) if (m := _search(c, text))]
        return min(hits)[2] if hits else -1

    def score(self, kind: str, text: str, context: dict[str, Any]) -> float:
        if kind == ItemKind.CAPTION.value:
            return 1.0 if _label_in(context["label"], text) else 0.0
        subject, obj = context["subject"], context.get("object")
        mode = Mode(context["mode"])
        if obj is None:
            return 1.0 if text == render_coordinates(self.scene, subject) else 0.0
        if subject not in self._by_id or obj not in self._by_id:
            return 0.0
        fresh = self.recompute(subject, obj)
        tags = context.get("tags")
        if tags is not None and sorted(tags) != fresh.sorted_tags():
            return 0.0
        return 1.0 if text == render_relation(fresh, self.scene.labels, mode, self.scene) else 0.0


class OfflineCorrector:
    """Replaces a failing caption with a label-only one and a failing relation
    with a fresh rendering from the spatial reasoner."""

    def __init__(self, judge: OfflineJudge) -> None:
        self.judge = judge

    def correct(self, kind: str, text: str, context: dict[str, Any]) -> str:
        if kind == ItemKind.CAPTION.value:
            return fallback_caption(context["label"])
        subject, obj = context["subject"], context.get("object")
        if obj is None:
            return render_coordinates(self.judge.scene, subject)
        return render_relation(self.triplet_for(subject, obj), self.judge.scene.labels, Mode(context["mode"]), self.judge.scene)

    def triplet_for(self, subject_id: int, object_id: int) -> RelationTriplet:
        return self.judge.recompute(subject_id, object_id)


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


@dataclass
class _Item:
    kind: ItemKind
    item_id: str
    text: str
    context: dict[str, Any]
    caption: ObjectCaption | None = None
    relation: RelationSentence | None = None


def _items(info: SceneInformation) -> list[_Item]:
    items = []
    for cap in info.object_captions:
        label = info.labels.get(cap.object_id, "object")
        items.append(_Item(ItemKind.CAPTION, str(cap.object_id), cap.text, {"object_id": cap.object_id, "label": label, "text": cap.text}, caption=cap))
    for rel in info.relation_sentences:
        ctx: dict[str, Any] = {"subject": rel.subject_id, "object": rel.object_id, "mode": info.mode.value}
        if rel.triplet is not None:
            ctx["tags"] = rel.triplet.sorted_tags()
            ctx["distance_m"] = rel.triplet.distance_m
        items.append(_Item(ItemKind.RELATION, relation_key(rel), rel.text, ctx, relation=rel))
    return items


def _score(item: _Item, judge: Judge, gt: Mapping[int, str] | None) -> float:
    if item.kind is ItemKind.CAPTION and gt:
        choices = sorted(set(gt.values()))
        index = judge.choose(identification_prompt(item.text, choices), choices, item.context)
        truth = gt.get(item.context["object_id"])
        return 1.0 if 0 <= index < len(choices) and choices[index] == truth else 0.0
    score = judge.score(item.kind.value, item.text, item.context)
    if not 0.0 <= score <= 1.0:
        raise ProviderError(f"judge score {score} outside [0, 1]", retryable=False)
    return float(score)


def reflect_once(
    info: SceneInformation,
    judge: Judge,
    corrector: Corrector,
    tau: float = DEFAULT_TAU,
    gt: Mapping[int, str] | None = None,
    max_in_flight: int = DEFAULT_IN_FLIGHT,
    round_index: int = 1,
) -> tuple[SceneInformation, list[ReflectionReport]]:
    if not 0.0 <= tau <= 1.0:
        raise ValidationError("tau must be in [0, 1]")
    items = _items(info)

    def score(item: _Item) -> tuple[float, str | None]:
        try:
            return _score(item, judge, gt), None
        except ProviderError as exc:
            logger.warning("judge failed on %s %s: %s", item.kind.value, item.item_id, exc)
            return 0.0, str(exc)

    scored = map_bounded(score, items, max_in_flight)

    def fix(pair: tuple[_Item, tuple[float, str | None]]) -> tuple[str | None, str | None]:
        item, (s, err) = pair
        if err is not None or s >= tau:
            return None, err
        try:
            new = corrector.correct(item.kind.value, item.text, item.context)
        except ProviderError as exc:
            logger.warning("corrector failed on %s %s: %s", item.kind.value, item.item_id, exc)
            return None, str(exc)
        if not new or not new.strip() or new.strip() == item.text:
            return None, None
        return new.strip(), None

    fixes = map_bounded(fix, list(zip(items, scored)), max_in_flight)

    new_caps: dict[int, ObjectCaption] = {}
    new_rels: dict[tuple[int, int | None], RelationSentence] = {}
    reports = []
    triplet_for = getattr(corrector, "triplet_for", None)
    for item, (s, score_err), (new_text, fix_err) in zip(items, scored, fixes):
        replaced = new_text is not None
        if item.caption is not None:
            if replaced:
                new_caps[item.caption.object_id] = replace(item.caption, text=new_text, score=s)
        elif replaced:
            rel = item.relation
            assert rel is not None
            triplet = None
            if triplet_for is not None and rel.object_id is not None:
                triplet = triplet_for(rel.subject_id, rel.object_id)
            new_rels[(rel.subject_id, rel.object_id)] = replace(rel, text=new_text, triplet=triplet)
        reports.append(
            ReflectionReport(
                item_id=item.item_id,
                kind=item.kind,
                score=s,
                replaced=replaced,
                old_text=item.text,
                new_text=new_text if replaced else item.text,
                round=round_index,
                error=score_err or fix_err,
            )
        )
    return with_updates(info, new_caps, new_rels), reports


def reflect(
    info: SceneInformation,
    judge: Judge,
    corrector: Corrector,
    tau: float = DEFAULT_TAU,
    gt: Mapping[int, str] | None = None,
    rounds: int = 1,
    max_in_flight: int = DEFAULT_IN_FLIGHT,
) -> tuple[SceneInformation, list[ReflectionReport]]:
    """Run ``rounds`` refinement passes (at most three); stops early once a
    pass replaces nothing."""
    if not 1 <= rounds <= MAX_ROUNDS:
        raise ValidationError(f"rounds must be in [1, {MAX_ROUNDS}]")
    reports: list[ReflectionReport] = []
    for r in range(1, rounds + 1):
        info, batch = reflect_once(info, judge, corrector, tau, gt, max_in_flight, r)
        reports.extend(batch)
        if not any(rep.replaced for rep in batch):
            break
    return info, reports
