"""Weighted logistic regression by full-batch gradient descent.

Minimizes the weighted negative log-likelihood plus a small ridge penalty
on the slope coefficients (never the intercept). The ridge default keeps
the estimate bounded when the data is linearly separable, which happens
routinely when the feature count approaches the sample count.
"""

from dataclasses import dataclass

import numpy as np

from imblab._numeric import sigmoid, softplus
from imblab.dataio import Dataset, LogisticGroundTruth
from imblab.reweight import WeightedDataset


@dataclass(frozen=True)
class LogisticFitConfig:
    ridge: float = 1e-4
    max_iters: int = 5000
    grad_tol: float = 1e-6
    step_size: float = 1.0

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_tol <= 0 or self.step_size <= 0:
            raise ValueError("grad_tol and step_size must be positive")


def nll_objective(omega, omega0, wds: WeightedDataset, ridge: float) -> float:
    """Weighted negative log-likelihood plus ridge * ||omega||^2 / 2."""
    z = wds.base.features @ omega + omega0
    nll = float(wds.weights @ (softplus(z) - wds.base.labels * z))
    return nll + 0.5 * ridge * float(omega @ omega)


def nll_gradient(omega, omega0, wds: WeightedDataset, ridge: float):
    z = wds.base.features @ omega + omega0
    resid = wds.weights * (sigmoid(z) - wds.base.labels)
    grad_omega = wds.base.features.T @ resid + ridge * omega
    grad_omega0 = float(resid.sum())
    return grad_omega, grad_omega0


def fit_logistic(wds: WeightedDataset, cfg: LogisticFitConfig = LogisticFitConfig(),
                 trace: list | None = None) -> LogisticGroundTruth:
    """Gradient descent with backtracking halving from a zero start.

    Stops when the sup-norm of the gradient falls below grad_tol or after
    max_iters accepted steps. If ``trace`` is a list, the objective value
    after each accepted step is appended to it.
    """
    n, d = wds.base.features.shape
    omega = np.zeros(d)
    omega0 = 0.0
    step = cfg.step_size
    obj = nll_objective(omega, omega0, wds, cfg.ridge)
    if not np.isfinite(obj):
        raise RuntimeError("non-finite objective at the zero start; weights too large")
    if trace is not None:
        trace.append(obj)
    for _ in range(cfg.max_iters):
        g_omega, g_omega0 = nll_gradient(omega, omega0, wds, cfg.ridge)
        if max(np.abs(g_omega).max(), abs(g_omega0)) <= cfg.grad_tol:
            break
        while True:
            new_omega = omega - step * g_omega
            new_omega0 = omega0 - step * g_omega0
            new_obj = nll_objective(new_omega, new_omega0, wds, cfg.ridge)
            if np.isfinite(new_obj) and new_obj <= obj:
                break
            step *= 0.5
            if step < 1e-30:
                raise RuntimeError(
                    "backtracking failed to find a finite decreasing step; "
                    "objective is non-finite or at machine precision"
                )
        omega, omega0, obj = new_omega, new_omega0, new_obj
        if trace is not None:
            trace.append(obj)
        # regrow after successful steps, capped so the step stays finite
        step = min(step * 2.0, cfg.step_size * 2.0**40)
    return LogisticGroundTruth(omega=omega, omega0=omega0)


def predict_logistic(params: LogisticGroundTruth, ds: Dataset) -> np.ndarray:
    """Elementwise sigmoid(omega.x + omega0) scores."""
    if ds.d != params.d:
        raise ValueError(f"dimension mismatch: model {params.d}, data {ds.d}")
    return sigmoid(ds.features @ params.omega + params.omega0)
