"""Ordinary least squares with t-statistics, plus the regression designs
that relate each family's best gamma to its complexity hyperparameters.

For every hyperparameter group the k best gamma values (by train or test
F1) become k observations; covariates are the family's complexity axes,
optionally augmented with the in-sample F1 of the selected model. A
Wilcoxon signed-rank routine supports the directional verdicts of the
synthetic tradeoff study.
"""

import math
from dataclasses import dataclass

import numpy as np

from imblab.metrics import _average_ranks
from imblab.sweep import (GBDT_CATBOOST_LIKE, GBDT_LIGHTGBM_LIKE, MLP_RESAMPLE,
                          MLP_WEIGHTED_COST, TradeoffStudyResult, group_records,
                          top_k_records)

_CONDITION_LIMIT = 1e12
_EXACT_FIT_REL_RESIDUAL = 1e-12

# complexity covariates per family; "mlp" pools both MLP variants
COVARIATES = {
    GBDT_LIGHTGBM_LIKE: ("n_estimators", "learning_rate", "max_depth", "max_leaves"),
    GBDT_CATBOOST_LIKE: ("n_estimators", "learning_rate", "max_depth"),
    MLP_WEIGHTED_COST: ("hidden_size", "n_layers"),
    MLP_RESAMPLE: ("hidden_size", "n_layers"),
    "mlp": ("hidden_size", "n_layers"),
}
_DEFAULT_MIN_ESTIMATORS = {GBDT_CATBOOST_LIKE: 2000}


@dataclass
class OlsFit:
    betas: np.ndarray
    t_stats: np.ndarray
    std_errors: np.ndarray
    rss: float
    dof: int


@dataclass
class RegressionResult:
    """One fitted design: coefficients, t-statistics, and raw correlations."""

    family: str
    k: int
    mode: str
    n: int
    covariates: tuple
    betas: np.ndarray      # intercept first
    t_stats: np.ndarray    # aligned with betas; inf marks an exact fit
    correlations: list     # per covariate, None when undefined


def pearson_r(x, y) -> float | None:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return None
    return float(xc @ yc) / denom


def _offending_column(X, names):
    """The column most explained by the others, by relative residual."""
    worst = None
    worst_resid = math.inf
    for j in range(X.shape[1]):
        others = np.delete(X, j, axis=1)
        coef, *_ = np.linalg.lstsq(others, X[:, j], rcond=None)
        resid = X[:, j] - others @ coef
        scale = float(np.linalg.norm(X[:, j])) or 1.0
        rel = float(np.linalg.norm(resid)) / scale
        if rel < worst_resid:
            worst_resid = rel
            worst = j
    return names[worst] if names else f"column {worst}"


def ols(X, y, names=None) -> OlsFit:
    """Least squares via QR with classical t-statistics.

    X must carry its intercept column. Designs with 2-norm condition above
    1e12 are refused, naming the most collinear column. A numerically
    exact fit (relative residual below 1e-12) reports every t-statistic as
    the inf sentinel, which serializes to the literal string 'inf'.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("response length does not match design rows")
    if n <= p:
        raise ValueError(f"need more than {p} observations, got {n}")
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > _CONDITION_LIMIT:
        name = _offending_column(X, names)
        raise ValueError(
            f"design matrix is rank deficient (condition {cond:.3g}); "
            f"{name} is collinear with the other columns"
        )
    Q, R = np.linalg.qr(X)
    betas = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ betas
    rss = float(resid @ resid)
    dof = n - p
    y_scale = float(y @ y)
    if rss <= _EXACT_FIT_REL_RESIDUAL**2 * max(y_scale, 1.0):
        t_stats = np.full(p, math.inf)
        std_errors = np.zeros(p)
        return OlsFit(betas=betas, t_stats=t_stats, std_errors=std_errors,
                      rss=rss, dof=dof)
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    std_errors = np.sqrt(sigma2 * np.diag(xtx_inv))
    t_stats = betas / std_errors
    return OlsFit(betas=betas, t_stats=t_stats, std_errors=std_errors,
                  rss=rss, dof=dof)


def _family_matches(record_family: str, family: str) -> bool:
    if family == "mlp":
        return record_family in (MLP_WEIGHTED_COST, MLP_RESAMPLE)
    return record_family == family


def build_design(records, family: str, k: int, mode: str,
                 min_estimators: int | None = None,
                 with_ensemble: bool = False):
    """Design matrix (with intercept), response vector, and covariate names.

    One observation per (hyperparameter group, rank <= k): covariates are
    the family's complexity axes and the response is the rank-r best gamma.
    with_ensemble appends the selected model's training F1 as a covariate.
    """
    if family not in COVARIATES:
        raise ValueError(f"no covariate template for family {family!r}")
    covs = COVARIATES[family]
    if min_estimators is None:
        min_estimators = _DEFAULT_MIN_ESTIMATORS.get(family, 0)
    recs = [r for r in records if _family_matches(r.family, family) and not r.error_msg]
    if min_estimators:
        recs = [r for r in recs if r.params.get("n_estimators", 0) >= min_estimators]
    if not recs:
        raise ValueError(f"no usable records for family {family!r}")
    for name in covs:
        values = set()
        for r in recs:
            if name not in r.params:
                raise ValueError(f"records lack covariate axis {name!r}")
            values.add(_float_param(r.params[name], name))
        if len(values) < 2:
            raise ValueError(f"covariate axis {name!r} has fewer than 2 distinct values")
    names = list(covs) + (["f1_train"] if with_ensemble else [])
    rows, y = [], []
    for key in sorted(group_records(recs)):
        group_family = key[0]
        group = dict(key[1])
        ranked = top_k_records(recs, _parse_group(group), k, mode, family=group_family)
        for rec in ranked:
            row = [_float_param(rec.params[c], c) for c in covs]
            if with_ensemble:
                if rec.f1_train is None:
                    continue
                row.append(float(rec.f1_train))
            rows.append(row)
            y.append(float(rec.gamma))
    X = np.column_stack([np.ones(len(rows)), np.asarray(rows, dtype=np.float64)])
    return X, np.asarray(y, dtype=np.float64), names


def _float_param(value, name) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"covariate axis {name!r} has non-numeric value {value!r}") from None


def _parse_group(group: dict) -> dict:
    # group keys store formatted strings; hand top_k_records parsed values
    from imblab.sweep import _parse_value

    return {k: _parse_value(v) if isinstance(v, str) else v for k, v in group.items()}


def analyze_family(records, family: str, k_list, modes,
                   min_estimators: int | None = None,
                   with_ensemble: bool = False) -> list:
    """One RegressionResult per (k, mode) pair."""
    results = []
    for k in k_list:
        for mode in modes:
            X, y, names = build_design(records, family, k, mode,
                                       min_estimators=min_estimators,
                                       with_ensemble=with_ensemble)
            fit = ols(X, y, names=["intercept"] + names)
            corrs = [pearson_r(X[:, j + 1], y) for j in range(len(names))]
            results.append(RegressionResult(
                family=family, k=k, mode=mode, n=len(y),
                covariates=tuple(names), betas=fit.betas,
                t_stats=fit.t_stats, correlations=corrs,
            ))
    return results


def _num_cell(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def results_to_csv(results, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("family,k,mode,n,covariate,beta,t_stat,corr\n")
        for res in results:
            rows = [("intercept", res.betas[0], res.t_stats[0], None)]
            for j, name in enumerate(res.covariates):
                rows.append((name, res.betas[j + 1], res.t_stats[j + 1],
                             res.correlations[j]))
            for name, beta, t, corr in rows:
                fh.write(f"{res.family},{res.k},{res.mode},{res.n},{name},"
                         f"{_num_cell(beta)},{_num_cell(t)},{_num_cell(corr)}\n")


def format_table(results) -> str:
    """Aligned text table: one line per (k, mode), beta/t/corr per covariate."""
    if not results:
        return "(no results)\n"
    covs = results[0].covariates
    header = ["k", "mode", "n", "intercept"]
    for name in covs:
        header += [f"{name}:beta", f"{name}:t", f"{name}:corr"]
    table = [header]
    for res in results:
        row = [str(res.k), res.mode, str(res.n), _short(res.betas[0])]
        for j in range(len(covs)):
            row += [_short(res.betas[j + 1]), _short(res.t_stats[j + 1]),
                    _short(res.correlations[j])]
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in table]
    return "\n".join(lines) + "\n"


def _short(v) -> str:
    if v is None:
        return "-"
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.4f}"


def normal_sf(z: float) -> float:
    """Upper tail of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(x, y, alternative: str = "greater"):
    """Paired Wilcoxon signed-rank test by normal approximation.

    Returns (W+, p). Zero differences are dropped; ties get average ranks
    with the matching variance correction. alternative='greater' tests
    whether x tends to exceed y.
    """
    if alternative not in ("greater", "less"):
        raise ValueError("alternative must be 'greater' or 'less'")
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var -= float(np.sum(counts**3 - counts)) / 48.0
    if var <= 0:
        return w_plus, 1.0
    z = (w_plus - mean) / math.sqrt(var)
    p = normal_sf(z) if alternative == "greater" else normal_sf(-z)
    return w_plus, p


def summarize_tradeoff(result: TradeoffStudyResult, alpha: float = 0.01,
                       low_power_below: int = 10) -> dict:
    """Means, Wilcoxon statistics, and directional verdicts for the study.

    Verdict 1: rebalanced training inflates coefficient error.
    Verdict 2: rebalanced training improves evaluation F1.
    """
    l2_d0, l2_d1 = result.paired("l2_error")
    f1_d0, f1_d1 = result.paired("f1")
    summary = {
        "replicates": result.replicates,
        "failures": result.failures,
        "paired_l2": int(len(l2_d0)),
        "paired_f1": int(len(f1_d0)),
        "alpha": alpha,
        "low_power": len(l2_d0) < low_power_below or len(f1_d0) < low_power_below,
    }
    if len(l2_d0):
        stat, p = wilcoxon_signed_rank(l2_d1, l2_d0, alternative="greater")
        summary.update(
            mean_l2_d0=float(l2_d0.mean()), mean_l2_d1=float(l2_d1.mean()),
            l2_wilcoxon_stat=stat, l2_p=p,
            l2_direction_confirmed=bool(l2_d1.mean() > l2_d0.mean() and p < alpha),
        )
    if len(f1_d0):
        stat, p = wilcoxon_signed_rank(f1_d1, f1_d0, alternative="greater")
        summary.update(
            mean_f1_d0=float(f1_d0.mean()), mean_f1_d1=float(f1_d1.mean()),
            f1_wilcoxon_stat=stat, f1_p=p,
            f1_direction_confirmed=bool(f1_d1.mean() > f1_d0.mean() and p < alpha),
        )
    return summary
