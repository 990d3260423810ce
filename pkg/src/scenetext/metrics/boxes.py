"""Axis-aligned 3D box overlap and grounding metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..errors import LengthMismatch, SchemaError, ValidationError


@dataclass(frozen=True)
class Box3:
    center: tuple[float, float, float]
    size: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.center) != 3 or len(self.size) != 3:
            raise ValidationError("boxes need 3-component center and size")
        if not all(s > 0 for s in self.size):
            raise ValidationError(f"box extents must be positive, got {self.size}")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float) - np.asarray(self.size, dtype=float) / 2

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float) + np.asarray(self.size, dtype=float) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    @classmethod
    def from_json(cls, raw: Any) -> "Box3":
        """Accepts ``{"center", "size"}`` or a flat ``[cx, cy, cz, w, h, l]``."""
        try:
            if isinstance(raw, dict):
                return cls(tuple(map(float, raw["center"])), tuple(map(float, raw["size"])))
            vals = [float(v) for v in raw]
            if len(vals) != 6:
                raise SchemaError("flat box needs 6 numbers")
            return cls(tuple(vals[:3]), tuple(vals[3:]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed box {raw!r}") from exc


def iou3(a: Box3, b: Box3) -> float:
    overlap = np.clip(np.minimum(a.hi, b.hi) - np.maximum(a.lo, b.lo), 0.0, None)
    inter = float(np.prod(overlap))
    union = a.volume + b.volume - inter
    return min(1.0, inter / union) if union > 0 else 0.0


def grounding_accuracy(preds: Sequence[Box3], gts: Sequence[Box3], threshold: float) -> float:
    """Fraction of prediction/ground-truth pairs with IoU at or above ``threshold``."""
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        return 0.0
    return sum(iou3(p, g) >= threshold for p, g in zip(preds, gts)) / len(preds)


def greedy_match(preds: Sequence[Box3], gts: Sequence[Box3], threshold: float) -> list[tuple[int, int, float]]:
    """One-to-one matches taken greedily in order of decreasing IoU.

    Equal IoUs are resolved by (pred index, gt index) so the matching is
    deterministic.
    """
    pairs = [
        (iou3(p, g), i, j)
        for i, p in enumerate(preds)
        for j, g in enumerate(gts)
    ]
    pairs = [x for x in pairs if x[0] >= threshold and x[0] > 0]
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = []
    for iou, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, iou))
    return matches


def precision_recall_f1(preds: Sequence[Box3], gts: Sequence[Box3], threshold: float) -> tuple[float, float, float]:
    if not preds and not gts:
        return 1.0, 1.0, 1.0
    if not preds or not gts:
        return (0.0 if preds else 1.0), (0.0 if gts else 1.0), 0.0
    tp = len(greedy_match(preds, gts, threshold))
    p = tp / len(preds)
    r = tp / len(gts)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def multi_object_f1(preds: Sequence[Box3], gts: Sequence[Box3], threshold: float) -> float:
    return precision_recall_f1(preds, gts, threshold)[2]
