"""Evaluate a predictions file and format the metric report.

Predictions are JSON lines ``{"id", "pred", "gt"}`` plus an optional
``"task"``. When ``task`` is missing it is inferred from the payload shape.

========== ================================== ==================================
task       pred                               gt
========== ================================== ==================================
grounding  box                                box
multi      list of boxes                      list of boxes
text       string                             string or list of strings
dense      {"box", "caption"}                 {"box", "captions": [..]}
plan       plan text                          plan text
========== ================================== ==================================

A box is ``{"center": [..], "size": [..]}`` or ``[cx, cy, cz, w, h, l]``.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Any, Iterable, Mapping

from ..errors import SchemaError, ValidationError
from .boxes import Box3, grounding_accuracy, iou3, multi_object_f1
from .plans import plan_scores
from .text import bleu4, cider, cider_per_sentence, em_refined, exact_match, meteor_simplified, rouge_l

TASKS = ("grounding", "multi", "text", "dense", "plan")

METRICS = {
    "grounding": ("acc@0.25", "acc@0.5"),
    "multi": ("f1@0.25", "f1@0.5"),
    "text": ("em", "em_r", "bleu4", "rouge_l", "meteor_s", "cider"),
    "dense": ("c@0.5", "b4@0.5"),
    "plan": ("g_acc", "t_acc"),
}
ALL_METRICS = tuple(m for ms in METRICS.values() for m in ms)

REPORT_HEADER = (
    "G_Acc: a plan counts as correct iff every index-aligned step has the same stemmed verb "
    "and object-reference set as the reference and the referenced objects coincide overall. "
    "T_Acc: matched steps / max(len(pred), len(gt)). "
    "METEOR-s: METEOR with exact and stem matching only (no synonyms)."
)


def _is_box(raw: Any) -> bool:
    if isinstance(raw, dict):
        return "center" in raw and "size" in raw
    return isinstance(raw, list) and len(raw) == 6 and all(isinstance(v, (int, float)) for v in raw)


def infer_task(record: Mapping[str, Any]) -> str:
    task = record.get("task")
    if task is not None:
        if task not in TASKS:
            raise SchemaError(f"record {record.get('id')}: unknown task {task!r}")
        return task
    pred = record.get("pred")
    if _is_box(pred):
        return "grounding"
    if isinstance(pred, list) and all(_is_box(p) for p in pred):
        return "multi"
    if isinstance(pred, dict) and "caption" in pred:
        return "dense"
    if isinstance(pred, str):
        return "text"
    raise SchemaError(f"record {record.get('id')}: cannot infer task from payload")


def _refs(gt: Any) -> list[str]:
    if isinstance(gt, str):
        return [gt]
    if isinstance(gt, list) and gt and all(isinstance(g, str) for g in gt):
        return list(gt)
    raise SchemaError(f"text ground truth must be a string or list of strings, got {gt!r}")


def evaluate(records: Iterable[Mapping[str, Any]], metrics: Iterable[str] | None = None) -> dict[str, float]:
    """Compute the requested metrics (all applicable ones by default)."""
    grouped: dict[str, list[Mapping[str, Any]]] = defaultdict(list)
    for rec in records:
        if "pred" not in rec or "gt" not in rec:
            raise SchemaError(f"record {rec.get('id')}: needs 'pred' and 'gt'")
        grouped[infer_task(rec)].append(rec)

    wanted = list(metrics) if metrics else [m for t in TASKS if grouped[t] for m in METRICS[t]]
    for m in wanted:
        if m not in ALL_METRICS:
            raise ValidationError(f"unknown metric {m!r}; choose from {', '.join(ALL_METRICS)}")

    out: dict[str, float] = {}
    for task in TASKS:
        names = [m for m in wanted if m in METRICS[task]]
        if not names:
            continue
        recs = grouped[task]
        if not recs:
            raise ValidationError(f"metric(s) {', '.join(names)} need {task!r} records")
        out.update(_task_metrics(task, recs, names))
    return out


def _task_metrics(task: str, recs: list[Mapping[str, Any]], names: list[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    if task == "grounding":
        preds = [Box3.from_json(r["pred"]) for r in recs]
        gts = [Box3.from_json(r["gt"]) for r in recs]
        for name in names:
            out[name] = grounding_accuracy(preds, gts, float(name.split("@")[1]))
    elif task == "multi":
        for name in names:
            thr = float(name.split("@")[1])
            scores = [
                multi_object_f1([Box3.from_json(b) for b in r["pred"]], [Box3.from_json(b) for b in r["gt"]], thr)
                for r in recs
            ]
            out[name] = sum(scores) / len(scores)
    elif task == "text":
        cands = [str(r["pred"]) for r in recs]
        refs = [_refs(r["gt"]) for r in recs]
        fns = {
            "em": lambda: sum(max(exact_match(c, g) for g in rs) for c, rs in zip(cands, refs)) / len(cands),
            "em_r": lambda: sum(max(em_refined(c, g) for g in rs) for c, rs in zip(cands, refs)) / len(cands),
            "bleu4": lambda: bleu4(cands, refs),
            "rouge_l": lambda: rouge_l(cands, refs),
            "meteor_s": lambda: meteor_simplified(cands, refs),
            "cider": lambda: cider(cands, refs),
        }
        for name in names:
            out[name] = fns[name]()
    elif task == "dense":
        hits = []
        cands, refs = [], []
        for r in recs:
            try:
                hits.append(iou3(Box3.from_json(r["pred"]["box"]), Box3.from_json(r["gt"]["box"])) >= 0.5)
                cands.append(str(r["pred"]["caption"]))
                refs.append(_refs(r["gt"]["captions"]))
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"record {r.get('id')}: malformed dense-caption payload") from exc
        if "c@0.5" in names:
            per = cider_per_sentence(cands, refs)
            out["c@0.5"] = sum(s for s, h in zip(per, hits) if h) / len(per)
        if "b4@0.5" in names:
            per_b = [bleu4([c], [rs]) if h else 0.0 for c, rs, h in zip(cands, refs, hits)]
            out["b4@0.5"] = sum(per_b) / len(per_b)
    elif task == "plan":
        pairs = [plan_scores(str(r["pred"]), str(r["gt"])) for r in recs]
        if "g_acc" in names:
            out["g_acc"] = sum(g for g, _ in pairs) / len(pairs)
        if "t_acc" in names:
            out["t_acc"] = sum(t for _, t in pairs) / len(pairs)
    return out


def format_table(report: Mapping[str, float]) -> str:
    width = max([len("metric"), *(len(k) for k in report)])
    lines = [REPORT_HEADER, "", f"{'metric':<{width}}  value", f"{'-' * width}  ------"]
    lines += [f"{k:<{width}}  {v:.4f}" for k, v in report.items()]
    return "\n".join(lines) + "\n"
