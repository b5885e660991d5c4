from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    undefined: bool = False  # an empty denominator was reported as 0

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(pred, truth, target=1) -> Metrics:
    """Precision, recall and F1 of the ``target`` class."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth differ in length")
    p, t = pred == target, truth == target
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    tn = int((~p & ~t).sum())
    undefined = False
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision, undefined = 0.0, True
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall, undefined = 0.0, True
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(precision, recall, f1, tp, fp, fn, tn, undefined)


def random_guess(prevalence: float) -> Metrics:
    """Expected scores when guessing the target at its own prevalence.

    Precision and recall both equal the prevalence, hence so does F1.
    """
    return Metrics(prevalence, prevalence, prevalence, 0, 0, 0, 0)


def mean_metrics(folds: list[Metrics]) -> Metrics:
    n = len(folds)
    return Metrics(
        sum(m.precision for m in folds) / n, sum(m.recall for m in folds) / n,
        sum(m.f1 for m in folds) / n, sum(m.tp for m in folds), sum(m.fp for m in folds),
        sum(m.fn for m in folds), sum(m.tn for m in folds), any(m.undefined for m in folds),
    )


def threshold_sweep(scores, truth, thresholds=None, target=1) -> list[tuple[float, Metrics]]:
    """Metrics at each decision threshold (analysis aid; training uses 0.5)."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth)
    if thresholds is None:
        thresholds = np.linspace(0.05, 0.95, 19)
    neg = 1 - target if target in (0, 1) else None
    out = []
    for t in thresholds:
        pred = np.where(scores >= t, target, neg)
        out.append((float(t), evaluate(pred, truth, target)))
    return out
