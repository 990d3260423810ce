"""Question-conditioned top-k selection of scene information.

Each caption is scored against the question by token-level late
interaction: build the caption-token x question-token cosine matrix, take
the best question match for every caption token and average over caption
tokens. A softmax over all candidate captions turns raw scores into
relevance weights. A second round re-scores the survivors against image
feature embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyCaption, InvalidK, SchemaError, ValidationError
from .providers import Embedder
from .sceneinfo import SceneInformation, count_tokens, render_text

UNIT_TOL = 1e-5
DEFAULT_K1 = 20
DEFAULT_K2 = 12
QUESTION_HEADER = "Question:"


@dataclass(frozen=True)
class EmbeddingMatrix:
    rows: np.ndarray
    owner: str = "question"

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.ndim != 2:
            raise ValidationError(f"{self.owner}: embeddings must be a 2-D matrix")
        if rows.shape[0] == 0:
            raise EmptyCaption(f"{self.owner}: no token embeddings")
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(rows)):
            raise ValidationError(f"{self.owner}: zero or non-finite token embedding")
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            rows = rows / norms[:, None]
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def dimension(self) -> int:
        return int(self.rows.shape[1])


class Round(IntEnum):
    ZERO = 0
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class SelectionResult:
    kept: tuple[tuple[int, float], ...]
    round: Round
    k: int
    prompt_prefix: str
    kept_relations: tuple[tuple[int, int | None], ...] = ()
    all_weights: Mapping[int, float] = field(default_factory=dict)

    @property
    def kept_ids(self) -> list[int]:
        return [oid for oid, _ in self.kept]

    @property
    def token_count(self) -> int:
        return count_tokens(self.prompt_prefix)

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": int(self.round),
            "k": self.k,
            "kept": [{"object_id": oid, "weight": w} for oid, w in self.kept],
            "kept_relations": [list(key) for key in self.kept_relations],
            "token_count": self.token_count,
            "prompt_prefix": self.prompt_prefix,
        }


def _as_matrix(m: EmbeddingMatrix | np.ndarray | Sequence, owner: str) -> EmbeddingMatrix:
    return m if isinstance(m, EmbeddingMatrix) else EmbeddingMatrix(np.asarray(m, dtype=float), owner)


def raw_scores(question: EmbeddingMatrix, captions: Sequence[EmbeddingMatrix]) -> np.ndarray:
    q = question.rows
    out = np.empty(len(captions))
    for i, cap in enumerate(captions):
        if cap.dimension != question.dimension:
            raise DimensionMismatch(f"{cap.owner}: dimension {cap.dimension} != {question.dimension}")
        sim = cap.rows @ q.T  # caption tokens x question tokens
        out[i] = sim.max(axis=1).mean()
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()


def relevance_scores(question: EmbeddingMatrix | np.ndarray, captions: Sequence[EmbeddingMatrix | np.ndarray]) -> np.ndarray:
    """Softmax-normalized relevance weight of every caption for the question."""
    if len(captions) == 0:
        raise EmptyCaption("at least one caption is required")
    q = _as_matrix(question, "question")
    caps = [_as_matrix(c, f"caption[{i}]") for i, c in enumerate(captions)]
    return softmax(raw_scores(q, caps))


def _rank(ids: Sequence[int], weights: np.ndarray, k: int) -> list[tuple[int, float]]:
    order = sorted(range(len(ids)), key=lambda i: (-weights[i], ids[i]))
    return [(ids[i], float(weights[i])) for i in order[: min(k, len(ids))]]


def assemble_prefix(info: SceneInformation, kept_ids: Sequence[int] | None, question: str = "") -> tuple[str, tuple]:
    """System message, kept captions, relations among kept objects, then the question."""
    keep = None if kept_ids is None else set(kept_ids)
    rels = [
        r
        for r in info.relation_sentences
        if keep is None or (r.subject_id in keep and (r.object_id is None or r.object_id in keep))
    ]
    text = render_text(info, caption_ids=keep, relations=rels)
    if question:
        text += f"\n{QUESTION_HEADER} {question.strip()}\n"
    return text, tuple((r.subject_id, r.object_id) for r in rels)


def _caption_matrices(info: SceneInformation, caption_embeddings: Mapping[int, Any], embedder: Embedder | None) -> list[EmbeddingMatrix]:
    mats = []
    for cap in info.object_captions:
        raw = caption_embeddings.get(cap.object_id)
        if raw is None:
            if embedder is None:
                raise ValidationError(f"no embeddings for caption of object {cap.object_id}")
            raw = embedder.embed_tokens(cap.text)
        mats.append(_as_matrix(raw, f"caption:{cap.object_id}"))
    return mats


def select_all(info: SceneInformation, question: str = "") -> SelectionResult:
    """The unfiltered baseline: every caption and relation, uniform weights."""
    ids = [c.object_id for c in info.object_captions]
    prefix, rels = assemble_prefix(info, None, question)
    w = 1.0 / len(ids) if ids else 0.0
    return SelectionResult(tuple((oid, w) for oid in ids), Round.ZERO, len(ids), prefix, rels)


def select_top_k(
    info: SceneInformation,
    question_embeddings: EmbeddingMatrix | np.ndarray,
    k: int = DEFAULT_K1,
    caption_embeddings: Mapping[int, Any] | None = None,
    embedder: Embedder | None = None,
    question: str = "",
) -> SelectionResult:
    if k < 1:
        raise InvalidK("k must be >= 1")
    if not info.object_captions:
        raise EmptyCaption("scene information has no captions")
    ids = [c.object_id for c in info.object_captions]
    weights = relevance_scores(question_embeddings, _caption_matrices(info, caption_embeddings or {}, embedder))
    kept = _rank(ids, weights, k)
    prefix, rels = assemble_prefix(info, [oid for oid, _ in kept], question)
    return SelectionResult(tuple(kept), Round.ONE, k, prefix, rels, dict(zip(ids, map(float, weights))))


def select_two_round(
    info: SceneInformation,
    question_embeddings: EmbeddingMatrix | np.ndarray,
    image_embeddings: EmbeddingMatrix | np.ndarray,
    k1: int = DEFAULT_K1,
    k2: int = DEFAULT_K2,
    caption_embeddings: Mapping[int, Any] | None = None,
    embedder: Embedder | None = None,
    question: str = "",
) -> SelectionResult:
    """Question-driven round of ``k1`` followed by an image-driven round of ``k2``.

    Round-two weights are a softmax over the round-one survivors only.
    """
    if k2 > k1:
        raise InvalidK(f"k2 ({k2}) must not exceed k1 ({k1})")
    if k2 < 1:
        raise InvalidK("k2 must be >= 1")
    first = select_top_k(info, question_embeddings, k1, caption_embeddings, embedder, question)
    survivors = first.kept_ids
    by_id = dict(zip([c.object_id for c in info.object_captions], _caption_matrices(info, caption_embeddings or {}, embedder)))
    weights = relevance_scores(image_embeddings, [by_id[oid] for oid in survivors])
    kept = _rank(survivors, weights, k2)
    prefix, rels = assemble_prefix(info, [oid for oid, _ in kept], question)
    return SelectionResult(tuple(kept), Round.TWO, k2, prefix, rels, dict(zip(survivors, map(float, weights))))


# ---------------------------------------------------------------------------
# embedding file
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingBundle:
    dimension: int
    question: np.ndarray | None = None
    captions: dict[int, np.ndarray] = field(default_factory=dict)
    image: np.ndarray | None = None
    question_text: str = ""

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"dimension": self.dimension}
        if self.question_text:
            out["question_text"] = self.question_text
        if self.question is not None:
            out["question"] = np.asarray(self.question).tolist()
        out["captions"] = {str(k): np.asarray(v).tolist() for k, v in sorted(self.captions.items())}
        if self.image is not None:
            out["image"] = np.asarray(self.image).tolist()
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "EmbeddingBundle":
        if not isinstance(data, dict) or not isinstance(data.get("dimension"), int):
            raise SchemaError("embedding file needs an integer 'dimension'")
        dim = data["dimension"]

        def matrix(raw: Any, where: str) -> np.ndarray:
            try:
                arr = np.asarray(raw, dtype=float)
            except (TypeError, ValueError):
                raise SchemaError(f"embedding file: {where} is not a numeric matrix") from None
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise DimensionMismatch(f"embedding file: {where} rows must have dimension {dim}")
            return arr

        captions = {}
        for key, raw in (data.get("captions") or {}).items():
            try:
                oid = int(key)
            except ValueError:
                raise SchemaError(f"embedding file: bad caption id {key!r}") from None
            captions[oid] = matrix(raw, f"captions[{key}]")
        return cls(
            dimension=dim,
            question=None if data.get("question") is None else matrix(data["question"], "question"),
            captions=captions,
            image=None if data.get("image") is None else matrix(data["image"], "image"),
            question_text=str(data.get("question_text", "")),
        )
