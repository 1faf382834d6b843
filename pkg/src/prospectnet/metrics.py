"""Confusion counts, accuracy / precision / recall / F-beta, and ROC AUC."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_counts(predictions, labels) -> ConfusionCounts:
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.size == 0:
        raise ValueError("empty input")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    if not (np.isin(p, (0, 1)).all() and np.isin(y, (0, 1)).all()):
        raise ValueError("predictions and labels must be 0/1")
    p = p.astype(bool)
    y = y.astype(bool)
    return ConfusionCounts(
        tp=int(np.sum(p & y)),
        fp=int(np.sum(p & ~y)),
        tn=int(np.sum(~p & ~y)),
        fn=int(np.sum(~p & y)),
    )


def f_beta(precision: float, recall: float, beta: float = 2.0) -> float:
    """(1 + b^2) P R / (b^2 P + R); 0 when both are 0."""
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f_beta: float
    beta: float = 2.0
    n: int = 0
    degenerate: tuple[str, ...] = field(default=())  # metrics whose denominator was 0 (reported as 0)

    FIELDS = ("accuracy", "precision", "recall", "f_beta")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["degenerate"] = ";".join(self.degenerate)
        return d

    def to_text(self) -> str:
        d = self.as_dict()
        return "".join(f"{k}: {d[k]}\n" for k in ("n", "beta", *self.FIELDS, "degenerate"))

    def to_csv_row(self, header: bool = False) -> str:
        d = self.as_dict()
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        keys = ["n", "beta", *self.FIELDS, "degenerate"]
        if header:
            w.writerow(keys)
        w.writerow([d[k] for k in keys])
        return out.getvalue()


def report_from_counts(c: ConfusionCounts, beta: float = 2.0) -> MetricReport:
    if c.total == 0:
        raise ValueError("empty input")
    degenerate = []
    if c.tp + c.fp == 0:
        precision = 0.0
        degenerate.append("precision")
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = 0.0
        degenerate.append("recall")
    else:
        recall = c.tp / (c.tp + c.fn)
    if beta * beta * precision + recall == 0:
        degenerate.append("f_beta")
    return MetricReport(
        accuracy=(c.tp + c.tn) / c.total,
        precision=precision,
        recall=recall,
        f_beta=f_beta(precision, recall, beta),
        beta=beta,
        n=c.total,
        degenerate=tuple(degenerate),
    )


def compute_metrics(predictions, labels, beta: float = 2.0) -> MetricReport:
    return report_from_counts(confusion_counts(predictions, labels), beta)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n1 * (n1 + 1) / 2) / (n0 * n1))


def aggregate(reports: list[MetricReport]) -> dict[str, tuple[float, float]]:
    """Mean and sample std (ddof=1; 0 for a single report) of each metric."""
    out = {}
    for name in MetricReport.FIELDS:
        vals = np.array([getattr(r, name) for r in reports])
        out[name] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
    return out
