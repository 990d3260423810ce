"""Action-first plan parsing and plan-level accuracy.

A plan is a list of steps, each starting with a verb and referring to
objects as ``[label-id]``. Plan scoring is index-aligned: step ``i`` of the
prediction is compared with step ``i`` of the reference.

* step match: same verb after Porter stemming and the same set of object
  references;
* step accuracy (T_Acc contribution): matched steps / max(len(pred), len(gt));
* task accuracy (G_Acc contribution): 1 iff every step matches and the
  union of referenced objects is identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..errors import ParseError
from .text import stem

_NUMBERED = re.compile(r"^\s*(?:step\s*)?(\d+)\s*[.):]\s*", re.IGNORECASE)
_BULLET = re.compile(r"^\s*[-*•]\s+")
REF_PATTERN = re.compile(r"\[([^\[\]]+?)-(\d+)\]")
_VERB = re.compile(r"[a-z][a-z'\-]*")


@dataclass(frozen=True)
class PlanStep:
    index: int
    action_verb: str
    target_refs: tuple[tuple[str, int], ...]
    raw_text: str

    @property
    def ref_set(self) -> frozenset[tuple[str, int]]:
        return frozenset(self.target_refs)


def _step_lines(text: str) -> list[str]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    numbered = [ln for ln in lines if _NUMBERED.match(ln)]
    if numbered:
        return [_NUMBERED.sub("", ln, count=1) for ln in numbered]
    return [_BULLET.sub("", ln, count=1) for ln in lines]


def parse_plan(text: str) -> list[PlanStep]:
    """Split a plan into steps.

    When any line is numbered (``1.``, ``2)``, ``Step 3:``) only numbered
    lines are steps, so a leading instruction line is skipped; otherwise
    every non-blank line is a step.
    """
    steps = []
    for index, line in enumerate(_step_lines(text)):
        body = line.strip()
        first = body.split()[0] if body.split() else ""
        word = first.lower().strip(".,;:!?\"'()")
        if not _VERB.fullmatch(word):
            raise ParseError(f"step {index + 1} has no leading verb: {body!r}")
        refs = tuple((label.strip().lower(), int(num)) for label, num in REF_PATTERN.findall(body))
        steps.append(PlanStep(index, word, refs, body))
    return steps


def steps_match(a: PlanStep, b: PlanStep) -> bool:
    return stem(a.action_verb) == stem(b.action_verb) and a.ref_set == b.ref_set


def plan_scores(pred: Sequence[PlanStep] | str, gt: Sequence[PlanStep] | str) -> tuple[int, float]:
    """(task-level, step-level) accuracy contributions for one plan pair."""
    pred_steps = parse_plan(pred) if isinstance(pred, str) else list(pred)
    gt_steps = parse_plan(gt) if isinstance(gt, str) else list(gt)
    longest = max(len(pred_steps), len(gt_steps))
    if longest == 0:
        return 1, 1.0
    matched = sum(steps_match(p, g) for p, g in zip(pred_steps, gt_steps))
    step_acc = matched / longest
    refs_p = frozenset().union(*(s.ref_set for s in pred_steps))
    refs_g = frozenset().union(*(s.ref_set for s in gt_steps))
    task = int(matched == longest and refs_p == refs_g)
    return task, step_acc
