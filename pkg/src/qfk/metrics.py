"""Confusion-matrix metrics with anomaly as the positive class."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError

CLASSES = ("normal", "anomaly")


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


@dataclass
class ClassScores:
    precision: float | None
    recall: float | None
    f1: float | None
    support: int


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    per_class: dict[str, ClassScores]
    macro: dict[str, float | None]
    weighted: dict[str, float | None]
    undefined: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float | None:
        return self.per_class["anomaly"].precision

    @property
    def recall(self) -> float | None:
        return self.per_class["anomaly"].recall

    @property
    def f1(self) -> float | None:
        return self.per_class["anomaly"].f1

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["n"] = self.n
        return doc

    def to_text(self) -> str:
        def fmt(v):
            return "  n/a" if v is None else f"{v:.3f}"

        lines = [
            f"rows={self.n}  TP={self.tp} FP={self.fp} TN={self.tn} FN={self.fn}",
            f"accuracy {self.accuracy:.3f}",
            f"{'':10s} {'prec':>6s} {'recall':>6s} {'f1':>6s} {'support':>8s}",
        ]
        for name in CLASSES:
            s = self.per_class[name]
            lines.append(f"{name:10s} {fmt(s.precision):>6s} {fmt(s.recall):>6s} {fmt(s.f1):>6s} {s.support:8d}")
        for label, avg in (("macro", self.macro), ("weighted", self.weighted)):
            lines.append(f"{label:10s} {fmt(avg['precision']):>6s} {fmt(avg['recall']):>6s} {fmt(avg['f1']):>6s}")
        if self.undefined:
            lines.append("undefined: " + ", ".join(self.undefined))
        return "\n".join(lines)


def _scores(tp: int, fp: int, fn: int, support: int) -> ClassScores:
    # F1 = 2TP / (2TP + FP + FN): the harmonic mean of precision and recall
    # where both exist, and still defined (0) when no row was predicted positive.
    return ClassScores(_ratio(tp, tp + fp), _ratio(tp, tp + fn), _ratio(2 * tp, 2 * tp + fp + fn), support)


def compute_metrics(labels, predictions) -> MetricsReport:
    """``labels``/``predictions``: 1 = anomaly, 0 = normal."""
    y = np.asarray(labels).astype(int)
    p = np.asarray(predictions).astype(int)
    if y.shape != p.shape or y.ndim != 1:
        raise DataError(f"label/prediction shapes differ: {y.shape} vs {p.shape}")
    if len(y) == 0:
        raise DataError("no rows to score")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    per_class = {
        "anomaly": _scores(tp, fp, fn, tp + fn),
        "normal": _scores(tn, fn, fp, tn + fp),
    }
    undefined = [
        f"{name}.{metric}"
        for name, s in per_class.items()
        for metric in ("precision", "recall", "f1")
        if getattr(s, metric) is None
    ]
    if undefined:
        warnings.warn(f"undefined metrics excluded from averages: {undefined}", RuntimeWarning, stacklevel=2)
    macro, weighted = {}, {}
    for metric in ("precision", "recall", "f1"):
        vals = [(getattr(s, metric), s.support) for s in per_class.values() if getattr(s, metric) is not None]
        macro[metric] = float(np.mean([v for v, _ in vals])) if vals else None
        total = sum(w for _, w in vals)
        weighted[metric] = sum(v * w for v, w in vals) / total if total else None
    return MetricsReport(tp, fp, tn, fn, (tp + tn) / len(y), per_class, macro, weighted, undefined)
