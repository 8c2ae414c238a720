"""The two mechanisms for the positive weight scalar gamma.

Cost-sensitive weighting multiplies each positive instance's loss term by
gamma; resampling draws training instances with replacement so a positive
is gamma times more likely per draw. Both are exposed behind PwsConfig so
every trainer can consume either. In expectation the two produce the same
training cost up to a known normalization, which
``expected_loss_equivalence_check`` verifies analytically.
"""

import math
from dataclasses import dataclass

import numpy as np

from imblab.dataio import Dataset

WEIGHTED_COST = "weighted_cost"
RESAMPLE = "resample"
_MODES = (WEIGHTED_COST, RESAMPLE)


@dataclass(frozen=True)
class PwsConfig:
    """gamma >= 1 plus the mechanism it is applied through."""

    gamma: float
    mode: str = WEIGHTED_COST
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 1.0):
            raise ValueError(f"gamma must be finite and >= 1, got {self.gamma}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass
class WeightedDataset:
    base: Dataset
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.base.n,):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match {self.base.n} rows"
            )
        if not np.isfinite(self.weights).all() or (self.weights <= 0).any():
            raise ValueError("weights must be positive and finite")


def unit_weights(ds: Dataset) -> WeightedDataset:
    """Weight-1 wrapper: the plain unweighted training cost."""
    return WeightedDataset(base=ds, weights=np.ones(ds.n))


def apply_weights(ds: Dataset, cfg: PwsConfig) -> WeightedDataset:
    """Instance weights gamma for positives, 1 for negatives."""
    if cfg.mode != WEIGHTED_COST:
        raise ValueError(f"apply_weights requires mode {WEIGHTED_COST!r}")
    weights = np.where(ds.labels == 1, cfg.gamma, 1.0)
    return WeightedDataset(base=ds, weights=weights)


def resample_probabilities(ds: Dataset, gamma: float) -> np.ndarray:
    """Per-instance draw probabilities: gamma*p for positives, p for negatives,
    with p = 1 / (n_neg + gamma * n_pos)."""
    denom = ds.negative_count + gamma * ds.positive_count
    return np.where(ds.labels == 1, gamma, 1.0) / denom


def resample(ds: Dataset, cfg: PwsConfig, m: int | None = None) -> Dataset:
    """m i.i.d. draws with replacement from the gamma-weighted distribution.

    m defaults to ds.n so the resampled set has the nominal training size.
    """
    if cfg.mode != RESAMPLE:
        raise ValueError(f"resample requires mode {RESAMPLE!r}")
    if m is None:
        m = ds.n
    if m < 1:
        raise ValueError("m must be positive")
    probs = resample_probabilities(ds, cfg.gamma)
    rng = np.random.default_rng(cfg.seed)
    idx = rng.choice(ds.n, size=m, replace=True, p=probs / probs.sum())
    return Dataset(features=ds.features[idx], labels=ds.labels[idx])


def expected_loss_equivalence_check(ds: Dataset, gamma: float, losses,
                                    m: int | None = None) -> float:
    """Relative gap between the weighted cost and the scaled expected
    resampled cost, computed analytically for fixed per-instance losses.

    For losses l_i of any fixed predictor, the expected total loss of m
    resampled draws is m * sum_i prob_i * l_i; scaling by
    (n_neg + gamma*n_pos) / m recovers the cost-sensitive objective
    exactly, so the returned deviation is floating-point noise. Intended
    for small datasets where the identity is being audited.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != (ds.n,):
        raise ValueError("losses must align with dataset rows")
    if m is None:
        m = ds.n
    denom = ds.negative_count + gamma * ds.positive_count
    weights = np.where(ds.labels == 1, gamma, 1.0)
    weighted_cost = float(weights @ losses)
    expected_resampled = m * float((weights / denom) @ losses)
    scaled = expected_resampled * denom / m
    if weighted_cost == 0.0:
        return abs(scaled)
    return abs(scaled - weighted_cost) / abs(weighted_cost)
