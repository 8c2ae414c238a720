"""Confusion-matrix statistics, F1, ROC AUC, and coefficient-recovery errors.

A metric that has no defined value (e.g. precision with no predicted
positives) is reported as ``None`` rather than NaN, and serializes to an
empty CSV cell downstream.
"""

from dataclasses import dataclass

import numpy as np

from imblab.dataio import LogisticGroundTruth

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if v < 0 or v != int(v):
                raise ValueError(f"{name} must be a non-negative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    """Per-model evaluation summary; None marks an undefined metric."""

    f1: float | None
    precision: float | None
    recall: float | None
    auc: float | None
    error: float | None


def _as_arrays(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError(
            f"labels {labels.shape} and scores {scores.shape} must be equal-length vectors"
        )
    if labels.size < 1:
        raise ValueError("need at least one instance")
    return labels, scores


def confusion(labels, scores, threshold=DEFAULT_THRESHOLD) -> ConfusionCounts:
    """Count outcomes with 'predict positive iff score >= threshold'."""
    labels, scores = _as_arrays(labels, scores)
    pred = scores >= threshold
    actual = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & actual)),
        fp=int(np.sum(pred & ~actual)),
        fn=int(np.sum(~pred & actual)),
        tn=int(np.sum(~pred & ~actual)),
    )


def f1(c: ConfusionCounts) -> float | None:
    """tp / (tp + (fp + fn) / 2); None when there are no positives anywhere."""
    denom = c.tp + 0.5 * (c.fp + c.fn)
    if denom == 0:
        return None
    return c.tp / denom


def precision(c: ConfusionCounts) -> float | None:
    if c.tp + c.fp == 0:
        return None
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float | None:
    if c.tp + c.fn == 0:
        return None
    return c.tp / (c.tp + c.fn)


def error(c: ConfusionCounts) -> float | None:
    if c.total == 0:
        return None
    return (c.fp + c.fn) / c.total


def _average_ranks(values):
    """1-based ranks with ties assigned the group average."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    new_group = np.empty(len(values), dtype=bool)
    new_group[0] = True
    new_group[1:] = sorted_vals[1:] != sorted_vals[:-1]
    group_id = np.cumsum(new_group) - 1
    counts = np.bincount(group_id)
    ends = np.cumsum(counts)
    starts = ends - counts
    avg = starts + (counts + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = avg[group_id]
    return ranks


def auc(labels, scores) -> float | None:
    """Mann-Whitney AUC with ties counted 1/2; None if a class is absent."""
    labels, scores = _as_arrays(labels, scores)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def report(labels, scores, threshold=DEFAULT_THRESHOLD) -> MetricsReport:
    """Full evaluation of score outputs against binary labels."""
    c = confusion(labels, scores, threshold)
    return MetricsReport(
        f1=f1(c),
        precision=precision(c),
        recall=recall(c),
        auc=auc(labels, scores),
        error=error(c),
    )


def _stacked(gt: LogisticGroundTruth) -> np.ndarray:
    return np.concatenate([gt.omega, [gt.omega0]])


def coef_l2_error(est: LogisticGroundTruth, truth: LogisticGroundTruth) -> float:
    """Euclidean distance between (omega, omega0) vectors."""
    if est.d != truth.d:
        raise ValueError(f"dimension mismatch: {est.d} vs {truth.d}")
    return float(np.linalg.norm(_stacked(est) - _stacked(truth)))


def coef_mse(est: LogisticGroundTruth, truth: LogisticGroundTruth) -> float:
    """Squared l2 error averaged over the d+1 coefficients."""
    l2 = coef_l2_error(est, truth)
    return l2 * l2 / (truth.d + 1)
