"""Offline metrics: macro precision/recall/F1 for binary response, expected CTR
for brand recommendation. All reported values are percentages in [0, 100].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import KeyMismatch, WrongBrandCount


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class BinaryMetrics:
    precision: float  # macro
    recall: float
    f1: float
    per_class: tuple[ClassMetrics, ClassMetrics]  # (class 0, class 1)
    confusion: tuple[tuple[int, int], tuple[int, int]]  # [truth][prediction]

    def to_json(self) -> dict:
        return {
            "precision": round(self.precision, 2),
            "recall": round(self.recall, 2),
            "f1": round(self.f1, 2),
            "per_class": {
                str(c): {
                    "precision": round(m.precision, 2),
                    "recall": round(m.recall, 2),
                    "f1": round(m.f1, 2),
                }
                for c, m in enumerate(self.per_class)
            },
            "confusion": [list(row) for row in self.confusion],
        }


@dataclass(frozen=True)
class CtrResult:
    expected_ctr: float
    per_user: tuple[tuple[str, float], ...]

    def to_json(self) -> dict:
        return {
            "expected_ctr": round(self.expected_ctr, 2),
            "per_user": [[uid, frac] for uid, frac in self.per_user],
        }


def _check_keys(predictions: Mapping, truths: Mapping) -> None:
    if not predictions or not truths:
        raise KeyMismatch("predictions and truths must be non-empty")
    if set(predictions) != set(truths):
        only_p = sorted(set(predictions) - set(truths))[:3]
        only_t = sorted(set(truths) - set(predictions))[:3]
        raise KeyMismatch(
            f"key sets differ (only in predictions: {only_p}, only in truths: {only_t})"
        )


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassMetrics(100.0 * precision, 100.0 * recall, 100.0 * f1)


def binary_metrics(
    predictions: Mapping[str, int], truths: Mapping[str, int]
) -> BinaryMetrics:
    """Per-class precision/recall/F1 (0/0 := 0) with macro-averaged headline."""
    _check_keys(predictions, truths)
    counts = [[0, 0], [0, 0]]  # [truth][prediction]
    for uid, truth in truths.items():
        pred = predictions[uid]
        if truth not in (0, 1) or pred not in (0, 1):
            raise KeyMismatch(f"labels must be 0/1, got truth={truth!r} pred={pred!r}")
        counts[truth][pred] += 1

    per_class = []
    for c in (0, 1):
        o = 1 - c
        per_class.append(_prf(tp=counts[c][c], fp=counts[o][c], fn=counts[c][o]))
    macro = ClassMetrics(
        (per_class[0].precision + per_class[1].precision) / 2,
        (per_class[0].recall + per_class[1].recall) / 2,
        (per_class[0].f1 + per_class[1].f1) / 2,
    )
    return BinaryMetrics(
        macro.precision,
        macro.recall,
        macro.f1,
        (per_class[0], per_class[1]),
        ((counts[0][0], counts[0][1]), (counts[1][0], counts[1][1])),
    )


def expected_ctr(
    predictions: Mapping[str, Sequence[str]],
    clicked: Mapping[str, frozenset | set],
    top_n: int = 3,
) -> CtrResult:
    """Mean per-user fraction of the top_n predicted brands that were clicked."""
    _check_keys(predictions, clicked)
    per_user = []
    for uid in sorted(predictions):
        pred = list(predictions[uid])
        if len(set(pred)) != top_n or len(pred) != top_n:
            raise WrongBrandCount(len(set(pred)), top_n)
        hits = len(set(pred) & set(clicked[uid]))
        per_user.append((uid, hits / top_n))
    mean = sum(frac for _, frac in per_user) / len(per_user)
    return CtrResult(100.0 * mean, tuple(per_user))


def format_binary_table(metrics: BinaryMetrics) -> str:
    lines = [
        f"{'':10}{'precision':>12}{'recall':>12}{'f1':>12}",
        f"{'class 0':10}{metrics.per_class[0].precision:>12.2f}"
        f"{metrics.per_class[0].recall:>12.2f}{metrics.per_class[0].f1:>12.2f}",
        f"{'class 1':10}{metrics.per_class[1].precision:>12.2f}"
        f"{metrics.per_class[1].recall:>12.2f}{metrics.per_class[1].f1:>12.2f}",
        f"{'macro':10}{metrics.precision:>12.2f}"
        f"{metrics.recall:>12.2f}{metrics.f1:>12.2f}",
    ]
    return "\n".join(lines)


def format_ctr_table(result: CtrResult) -> str:
    return (
        f"{'users':10}{len(result.per_user):>12}\n"
        f"{'E[CTR] %':10}{result.expected_ctr:>12.2f}"
    )
