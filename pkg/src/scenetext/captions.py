"""Per-object caption candidates: similarity ranking and fusion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, ProviderError, SchemaError, ValidationError
from .providers import DEFAULT_IN_FLIGHT, Refiner, map_bounded
from .scene import Scene

logger = logging.getLogger(__name__)

TOP_N = 10


class Source(str, Enum):
    SERVICE = "service"
    OFFLINE_FILE = "offline_file"


@dataclass(frozen=True)
class CaptionCandidate:
    object_id: int
    text: str
    source: Source = Source.OFFLINE_FILE
    embedding: tuple[float, ...] | None = None
    similarity: float | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValidationError(f"object {self.object_id}: empty caption candidate")


@dataclass(frozen=True)
class ObjectCaption:
    object_id: int
    text: str
    candidates_used: int = 0
    refined: bool = False
    score: float | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValidationError(f"object {self.object_id}: empty caption")


def _unit(vec: Any) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(arr)
    return arr / norm if norm > 0 else arr


def rank_candidates(
    crop_embedding: Sequence[float],
    candidates: Sequence[CaptionCandidate],
    top_n: int = TOP_N,
) -> list[CaptionCandidate]:
    """Score candidates by cosine similarity to the crop and keep the best ``top_n``.

    Equal similarities are ordered by candidate text so the result never
    depends on input order.
    """
    if top_n < 1:
        raise ValidationError("top_n must be >= 1")
    crop = _unit(crop_embedding)
    scored = []
    for cand in candidates:
        if cand.embedding is None:
            raise ValidationError(f"candidate {cand.text!r} has no embedding")
        emb = _unit(cand.embedding)
        if emb.shape != crop.shape:
            raise DimensionMismatch(f"candidate dimension {emb.shape[0]} != crop dimension {crop.shape[0]}")
        sim = float(np.clip(np.dot(crop, emb), -1.0, 1.0))
        scored.append(replace(cand, similarity=sim))
    scored.sort(key=lambda c: (-c.similarity, c.text))
    return scored[: min(top_n, len(scored))]


def fuse_captions(ranked: Sequence[CaptionCandidate], refiner: Refiner | None = None, label: str = "object") -> ObjectCaption:
    """Merge ranked candidates into one caption.

    Without a refiner the best-ranked candidate is used verbatim. A refiner
    failure propagates as ProviderError; the caller decides about retries.
    """
    if not ranked:
        raise ValidationError("cannot fuse an empty candidate list")
    object_id = ranked[0].object_id
    if refiner is None:
        best = min(ranked, key=lambda c: (-(c.similarity if c.similarity is not None else float("-inf")), c.text))
        return ObjectCaption(object_id, best.text, candidates_used=len(ranked), refined=False)
    text = refiner.refine(label, [c.text for c in ranked])
    if not isinstance(text, str) or not text.strip():
        raise ProviderError("refinement service: malformed response (empty caption)", retryable=False)
    return ObjectCaption(object_id, text.strip(), candidates_used=len(ranked), refined=True)


def fallback_caption(label: str) -> str:
    return f"a {label.replace('_', ' ')}"


def caption_scene(
    scene: Scene,
    candidates: Mapping[int, Sequence[CaptionCandidate]],
    crop_embeddings: Mapping[int, Sequence[float]] | None = None,
    refiner: Refiner | None = None,
    top_n: int = TOP_N,
    max_in_flight: int = DEFAULT_IN_FLIGHT,
) -> list[ObjectCaption]:
    """One caption per scene object, ordered by object id.

    Objects without candidates get a label-only caption. When no crop
    embedding is available the normalized mean of the candidate embeddings
    stands in for it.
    """
    crop_embeddings = crop_embeddings or {}

    def one(obj) -> ObjectCaption:
        cands = list(candidates.get(obj.id, ()))
        if not cands:
            return ObjectCaption(obj.id, fallback_caption(obj.label))
        crop = crop_embeddings.get(obj.id)
        if crop is None:
            crop = _unit(np.mean([_unit(c.embedding) for c in cands], axis=0))
        ranked = rank_candidates(crop, cands, top_n)
        return fuse_captions(ranked, refiner, obj.label)

    return map_bounded(one, scene.objects, max_in_flight if refiner is not None else 1)


def candidates_from_dict(data: Any) -> dict[int, list[CaptionCandidate]]:
    """Parse an offline candidate file: ``{object_id: [{"text", "embedding"}]}``."""
    if not isinstance(data, dict):
        raise SchemaError("candidate file must map object ids to candidate arrays")
    out: dict[int, list[CaptionCandidate]] = {}
    for key, items in data.items():
        try:
            oid = int(key)
        except ValueError:
            raise SchemaError(f"candidate file: bad object id {key!r}") from None
        if not isinstance(items, list):
            raise SchemaError(f"candidate file: object {key} must map to an array")
        cands = []
        for item in items:
            if not isinstance(item, dict) or not isinstance(item.get("text"), str):
                raise SchemaError(f"candidate file: object {key} has a candidate without text")
            emb = item.get("embedding")
            if emb is not None and (not isinstance(emb, list) or not all(isinstance(v, (int, float)) for v in emb)):
                raise SchemaError(f"candidate file: object {key} has a malformed embedding")
            cands.append(CaptionCandidate(oid, item["text"], Source.OFFLINE_FILE, None if emb is None else tuple(float(v) for v in emb)))
        out[oid] = cands
    return out


def candidates_to_dict(candidates: Mapping[int, Sequence[CaptionCandidate]]) -> dict[str, list[dict]]:
    return {
        str(oid): [
            {"text": c.text, "embedding": None if c.embedding is None else list(c.embedding)}
            for c in cands
        ]
        for oid, cands in sorted(candidates.items())
    }


def crop_embeddings_from_dict(data: Any) -> dict[int, tuple[float, ...]]:
    if not isinstance(data, dict):
        raise SchemaError("crop embedding file must map object ids to vectors")
    try:
        return {int(k): tuple(float(x) for x in v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"crop embedding file: {exc}") from exc


def caption_to_dict(caption: ObjectCaption, label: str | None = None) -> dict:
    out: dict[str, Any] = {"object_id": caption.object_id}
    if label is not None:
        out["label"] = label
    out.update(
        {
            "text": caption.text,
            "candidates_used": caption.candidates_used,
            "refined": caption.refined,
            "score": caption.score,
        }
    )
    return out


def caption_from_dict(data: dict) -> ObjectCaption:
    try:
        return ObjectCaption(
            object_id=int(data["object_id"]),
            text=str(data["text"]),
            candidates_used=int(data.get("candidates_used", 0)),
            refined=bool(data.get("refined", False)),
            score=None if data.get("score") is None else float(data["score"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed caption record: {exc}") from exc
