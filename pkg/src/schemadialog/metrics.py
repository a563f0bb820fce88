"""Accuracy, weighted F1, and run-level significance testing.

Weighted F1 follows the usual convention: per-class precision/recall/F1
over the classes present in the gold labels, zero where a denominator is
zero, averaged with weights proportional to gold support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from scipy import stats

from .errors import EmptyInput, InsufficientSeeds, LengthMismatch


@dataclass(frozen=True)
class ClassMetrics:
    action: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    weighted_f1: float
    per_class: tuple[ClassMetrics, ...]
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "n": self.n,
            "per_class": [
                {
                    "action": c.action,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
        }


def _check(preds: Sequence[str], golds: Sequence[str]) -> None:
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} golds")
    if not golds:
        raise EmptyInput("no predictions to score")


def accuracy(preds: Sequence[str], golds: Sequence[str]) -> float:
    _check(preds, golds)
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def weighted_f1(preds: Sequence[str], golds: Sequence[str]) -> MetricReport:
    _check(preds, golds)
    classes = sorted(set(golds))
    per_class: list[ClassMetrics] = []
    total = len(golds)
    weighted = 0.0
    for cls in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(preds, golds) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(preds, golds) if p != cls and g == cls)
        support = tp + fn
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        per_class.append(ClassMetrics(cls, precision, recall, f1, support))
        weighted += (support / total) * f1
    return MetricReport(
        accuracy=accuracy(preds, golds),
        weighted_f1=weighted,
        per_class=tuple(per_class),
        n=total,
    )


def significance(per_seed_values: dict[str, Sequence[float]]) -> dict[tuple[str, str], float]:
    """Pairwise two-sample t-test p-values over per-seed run metrics.

    Zero-variance pairs with equal means report p = 1.0 (no evidence of a
    difference); the degenerate case is not an error.
    """
    names = sorted(per_seed_values)
    for name in names:
        if len(per_seed_values[name]) < 2:
            raise InsufficientSeeds(f"model {name!r} has < 2 seeds")
    out: dict[tuple[str, str], float] = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            xs, ys = list(per_seed_values[a]), list(per_seed_values[b])
            if max(xs) == min(xs) and max(ys) == min(ys):
                out[(a, b)] = 1.0 if xs[0] == ys[0] else 0.0
                continue
            stat = stats.ttest_ind(xs, ys, equal_var=True)
            p = float(stat.pvalue)
            out[(a, b)] = 1.0 if p != p else p  # NaN -> undefined variance, report as 1
    return out
