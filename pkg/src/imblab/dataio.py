"""Synthetic dataset generation and CSV persistence.

The generators implement a seeded logistic ground truth: coefficients are
drawn once, the intercept is calibrated so that standard-normal inputs
produce a requested positive rate, and two sampling regimes are exposed:
the raw imbalanced stream and a rebalanced stream obtained by rejection
sampling to an exact class composition.
"""

from dataclasses import dataclass

import numpy as np

from imblab._numeric import sigmoid

_CALIBRATION_MC_SAMPLES = 100_000
_CALIBRATION_TOL = 0.005
_CALIBRATION_RANGE = (-50.0, 50.0)
_REJECTION_BLOCK = 1024
DEFAULT_MAX_DRAWS = 10_000_000


@dataclass
class Dataset:
    """An n x d float feature matrix with binary labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least one row and one column, got {n}x{d}")
        if self.labels.shape != (n,):
            raise ValueError(
                f"labels length {self.labels.shape} does not match {n} feature rows"
            )
        if not np.isfinite(self.features).all():
            raise ValueError("features contain NaN or infinite values")
        bad = (self.labels != 0) & (self.labels != 1)
        if bad.any():
            raise ValueError(f"labels must be 0 or 1, found {self.labels[bad][0]}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def positive_count(self) -> int:
        return int(self.labels.sum())

    @property
    def negative_count(self) -> int:
        return self.n - self.positive_count


@dataclass(frozen=True)
class LogisticGroundTruth:
    """Coefficients of a logistic model: scores are sigmoid(omega.x + omega0)."""

    omega: np.ndarray
    omega0: float

    def __post_init__(self):
        omega = np.ascontiguousarray(self.omega, dtype=np.float64)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "omega0", float(self.omega0))
        if omega.ndim != 1 or omega.size < 1:
            raise ValueError("omega must be a non-empty 1-D vector")
        if not (np.isfinite(omega).all() and np.isfinite(self.omega0)):
            raise ValueError("coefficients must be finite")

    @property
    def d(self) -> int:
        return self.omega.size


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape, target positive rate, and seed of a synthetic problem."""

    d: int
    n: int
    target_positive_rate: float
    seed: int

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if not 0.0 < self.target_positive_rate < 1.0:
            raise ValueError(
                f"target_positive_rate must be in (0,1), got {self.target_positive_rate}"
            )
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def calibrate_intercept(omega, target_rate, seed, n_mc=_CALIBRATION_MC_SAMPLES):
    """Bisect for the intercept giving the target positive rate under N(0, I).

    The positive rate is estimated by Monte Carlo on ``n_mc`` draws of
    omega.x, which for standard normal x is a normal scalar with standard
    deviation ||omega||; the same draws are reused for every bisection step
    so the estimated rate is a monotone function of the intercept.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target rate must be in (0,1)")
    rng = np.random.default_rng(seed)
    margins = rng.standard_normal(n_mc) * np.linalg.norm(omega)

    def rate(omega0):
        return float(np.mean(sigmoid(margins + omega0)))

    lo, hi = _CALIBRATION_RANGE
    if not rate(lo) - _CALIBRATION_TOL <= target_rate <= rate(hi) + _CALIBRATION_TOL:
        raise ValueError(
            f"cannot bracket positive rate {target_rate} with intercept in "
            f"[{lo}, {hi}]; rate is pathological for this coefficient scale"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target_rate) <= 1e-4 or hi - lo < 1e-10:
            return mid
        if r < target_rate:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(rate(mid) - target_rate) > _CALIBRATION_TOL:
        raise ValueError(f"intercept calibration failed to reach rate {target_rate}")
    return mid


def make_ground_truth(cfg: GeneratorConfig) -> LogisticGroundTruth:
    """Draw coefficients N(0, 1/d) and calibrate the intercept to the target rate."""
    rng = np.random.default_rng(cfg.seed)
    omega = rng.standard_normal(cfg.d) / np.sqrt(cfg.d)
    omega0 = calibrate_intercept(omega, cfg.target_positive_rate, seed=rng.integers(2**63))
    return LogisticGroundTruth(omega=omega, omega0=omega0)


def _draw(gt: LogisticGroundTruth, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    x = rng.standard_normal((n, gt.d))
    p = sigmoid(x @ gt.omega + gt.omega0)
    y = (rng.random(n) < p).astype(np.int64)
    return x, y


def sample_d0(gt: LogisticGroundTruth, n: int, seed) -> Dataset:
    """Sample n rows of the raw process: x ~ N(0, I), y ~ Bernoulli(sigmoid)."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    x, y = _draw(gt, n, rng)
    return Dataset(features=x, labels=y)


def _collect_quota(gt, n_pos, n_neg, rng, max_draws):
    """Rejection-sample the raw process until exact class quotas are met.

    Returns the collected rows (positives first) and the raw draw count,
    counted as in a one-row-at-a-time process: rows drawn after the last
    quota fills are not counted.
    """
    pos, neg = [], []
    got_pos = got_neg = 0
    draws = 0
    while True:
        p_rem = n_pos - got_pos
        n_rem = n_neg - got_neg
        if p_rem == 0 and n_rem == 0:
            break
        if draws >= max_draws:
            raise ValueError(
                f"rejection sampling exceeded {max_draws} raw draws with "
                f"{got_pos}/{n_pos} positives and {got_neg}/{n_neg} negatives; "
                "target rate too extreme"
            )
        block = min(_REJECTION_BLOCK, max_draws - draws)
        x, y = _draw(gt, block, rng)
        pos_rows = x[y == 1]
        neg_rows = x[y == 0]
        take_p = min(len(pos_rows), p_rem)
        take_n = min(len(neg_rows), n_rem)
        if take_p:
            pos.append(pos_rows[:take_p])
        if take_n:
            neg.append(neg_rows[:take_n])
        got_pos += take_p
        got_neg += take_n
        if got_pos == n_pos and got_neg == n_neg:
            used = 0
            if p_rem > 0 and take_p == p_rem:
                cp = np.cumsum(y == 1)
                used = max(used, int(np.searchsorted(cp, p_rem)) + 1)
            if n_rem > 0 and take_n == n_rem:
                cn = np.cumsum(y == 0)
                used = max(used, int(np.searchsorted(cn, n_rem)) + 1)
            draws += used if used else block
            break
        draws += block
    features = np.vstack(pos + neg)
    labels = np.concatenate([np.ones(n_pos, dtype=np.int64),
                             np.zeros(n_neg, dtype=np.int64)])
    return features, labels, draws


def sample_d1(gt: LogisticGroundTruth, n: int, balance: float, seed,
              max_draws=DEFAULT_MAX_DRAWS) -> Dataset:
    """Sample n rows rebalanced to an exact composition.

    Exactly ceil(n * balance) positives and the remaining negatives are
    collected by rejection from the raw process, then shuffled.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < balance < 1.0:
        raise ValueError("balance must be in (0,1)")
    n_pos = int(np.ceil(n * balance))
    n_neg = n - n_pos
    if n_pos < 1 or n_neg < 1:
        raise ValueError(f"composition {n_pos}/{n_neg} leaves one class empty")
    rng = np.random.default_rng(seed)
    features, labels, _ = _collect_quota(gt, n_pos, n_neg, rng, max_draws)
    perm = rng.permutation(n)
    return Dataset(features=features[perm], labels=labels[perm])


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset as f0,...,f{d-1},label with round-trip exact floats."""
    with open(path, "w", newline="\n") as fh:
        header = [f"f{j}" for j in range(ds.d)] + ["label"]
        fh.write(",".join(header) + "\n")
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            cells.append(str(int(ds.labels[i])))
            fh.write(",".join(cells) + "\n")


def load_csv(path) -> Dataset:
    """Read a dataset written by save_csv; the last column must be 'label'."""
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2 or header[-1] != "label":
        raise ValueError(f"{path}: last header column must be 'label'")
    d = len(header) - 1
    rows = []
    labels = []
    for i, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != d + 1:
            raise ValueError(f"{path} row {i}: expected {d + 1} cells, got {len(cells)}")
        try:
            values = [float(c) for c in cells[:-1]]
            label = float(cells[-1])
        except ValueError:
            raise ValueError(f"{path} row {i}: non-numeric cell") from None
        if label not in (0.0, 1.0):
            raise ValueError(f"{path} row {i}: label must be 0 or 1, got {cells[-1]}")
        rows.append(values)
        labels.append(int(label))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(features=np.asarray(rows, dtype=np.float64),
                   labels=np.asarray(labels, dtype=np.int64))
