"""Grounding, answer, captioning and planning metrics."""

from .boxes import Box3, grounding_accuracy, iou3, multi_object_f1, precision_recall_f1
from .plans import PlanStep, parse_plan, plan_scores
from .report import evaluate, format_table
from .text import bleu4, cider, cider_per_sentence, em_refined, exact_match, meteor_simplified, normalize_answer, rouge_l

__all__ = [
    "Box3", "PlanStep", "bleu4", "cider", "cider_per_sentence", "em_refined", "evaluate", "exact_match", "format_table",
    "grounding_accuracy", "iou3", "meteor_simplified", "multi_object_f1", "normalize_answer",
    "parse_plan", "plan_scores", "precision_recall_f1", "rouge_l",
]
