"""Hyperparameter x gamma sweep harness and the synthetic tradeoff study.

A sweep enumerates the Cartesian product of hyperparameter axes with a
gamma grid, trains one model per cell, and appends one CSV record per
cell. Runs are resumable (cells already on disk are skipped), cell seeds
are stable hashes of the cell identity, and the finished file is rewritten
in sorted order so worker count never changes the artifact.
"""

import hashlib
import itertools
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from imblab import metrics
from imblab.dataio import Dataset, GeneratorConfig, make_ground_truth, sample_d0, sample_d1
from imblab.gbdt import GbdtConfig, fit_gbdt, predict_gbdt
from imblab.linear_model import LogisticFitConfig, fit_logistic, predict_logistic
from imblab.metrics import coef_l2_error, coef_mse
from imblab.mlp import MlpConfig, fit_mlp, predict_mlp
from imblab.reweight import RESAMPLE, WEIGHTED_COST, PwsConfig, apply_weights, unit_weights

FULL_PWS_GRID = tuple(float(g) for g in range(1, 151))
COARSE_PWS_GRID = (1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 20.0, 28.0,
                   40.0, 57.0, 80.0, 113.0, 150.0)

GBDT_LIGHTGBM_LIKE = "gbdt_lightgbm_like"
GBDT_CATBOOST_LIKE = "gbdt_catboost_like"
MLP_WEIGHTED_COST = "mlp_weighted_cost"
MLP_RESAMPLE = "mlp_resample"
LOGISTIC = "logistic"

# allowed axis names per family, in canonical column order
FAMILY_AXES = {
    GBDT_LIGHTGBM_LIKE: ("n_estimators", "learning_rate", "max_depth",
                         "max_leaves", "min_child_samples"),
    GBDT_CATBOOST_LIKE: ("n_estimators", "learning_rate", "max_depth",
                         "min_child_samples"),
    MLP_WEIGHTED_COST: ("hidden_size", "n_layers", "init_scale", "batchnorm",
                        "learning_rate", "momentum", "batch_size", "epochs"),
    MLP_RESAMPLE: ("hidden_size", "n_layers", "init_scale", "batchnorm",
                   "learning_rate", "momentum", "batch_size", "epochs"),
    LOGISTIC: ("ridge", "max_iters", "grad_tol", "step_size"),
}
FAMILIES = tuple(FAMILY_AXES)

_METRIC_COLUMNS = ("f1_train", "error_train", "f1_test", "error_test",
                   "precision_test", "recall_test", "auc_test")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        raise ValueError("boolean axis values are not supported")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass(frozen=True)
class GridSpec:
    """One family's hyperparameter axes plus the gamma grid and base seed."""

    family: str
    axes: dict
    pws_grid: tuple = FULL_PWS_GRID
    base_seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILY_AXES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        allowed = FAMILY_AXES[self.family]
        if not self.axes:
            raise ValueError("axes must not be empty")
        for name, values in self.axes.items():
            if name not in allowed:
                raise ValueError(f"axis {name!r} is not valid for {self.family}")
            if len(tuple(values)) == 0:
                raise ValueError(f"axis {name!r} has no values")
        grid = tuple(float(g) for g in self.pws_grid)
        if not grid or any(g < 1 for g in grid):
            raise ValueError("pws_grid values must be >= 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("pws_grid must be strictly increasing")
        object.__setattr__(self, "pws_grid", grid)
        # canonical axis order for stable cell identities and CSV columns
        ordered = {name: tuple(self.axes[name]) for name in allowed if name in self.axes}
        object.__setattr__(self, "axes", ordered)

    @property
    def axis_names(self) -> tuple:
        return tuple(self.axes)


@dataclass(frozen=True)
class Cell:
    family: str
    params: tuple  # ((axis, value), ...) in spec order
    gamma: float
    seed: int

    def params_dict(self) -> dict:
        return dict(self.params)


def cell_identity(family: str, params, gamma: float) -> str:
    parts = [family]
    parts += [f"{k}={_fmt_value(v)}" for k, v in params]
    parts.append(f"gamma={_fmt_value(float(gamma))}")
    return "|".join(parts)


def cell_seed(base_seed: int, identity: str) -> int:
    digest = hashlib.sha256(f"{base_seed}|{identity}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def enumerate_grid(spec: GridSpec) -> list:
    """Full Cartesian product of axes x pws_grid in deterministic order."""
    names = spec.axis_names
    cells = []
    for combo in itertools.product(*(spec.axes[name] for name in names)):
        params = tuple(zip(names, combo))
        for gamma in spec.pws_grid:
            identity = cell_identity(spec.family, params, gamma)
            cells.append(Cell(family=spec.family, params=params, gamma=float(gamma),
                              seed=cell_seed(spec.base_seed, identity)))
    return cells


@dataclass
class SweepRecord:
    """One trained cell: identity, train/test metrics, timing, error note."""

    family: str
    params: dict
    gamma: float
    seed: int
    f1_train: float | None = None
    error_train: float | None = None
    f1_test: float | None = None
    error_test: float | None = None
    precision_test: float | None = None
    recall_test: float | None = None
    auc_test: float | None = None
    wall_time_seconds: float = 0.0
    error_msg: str = ""

    def key(self) -> tuple:
        return (self.family,
                tuple((k, _fmt_value(v)) for k, v in self.params.items()),
                _fmt_value(float(self.gamma)))

    def metric(self, name: str, mode: str) -> float | None:
        return getattr(self, f"{name}_{mode}")


def _gbdt_config(family: str, params: dict) -> GbdtConfig:
    p = dict(params)
    if family == GBDT_CATBOOST_LIKE:
        # the leaf budget is not tunable in this family; a depth-bound
        # tree has at most 2**max_depth leaves
        p["max_leaves"] = 2 ** int(p["max_depth"])
    p.setdefault("min_child_samples", 5)
    return GbdtConfig(
        n_estimators=int(p["n_estimators"]),
        max_depth=int(p["max_depth"]),
        max_leaves=int(p["max_leaves"]),
        learning_rate=float(p["learning_rate"]),
        min_child_samples=int(p["min_child_samples"]),
    )


def _mlp_config(params: dict, seed: int) -> MlpConfig:
    p = dict(params)
    return MlpConfig(
        hidden_size=int(p["hidden_size"]),
        n_layers=int(p.get("n_layers", 1)),
        init_scale=float(p.get("init_scale", 1.0)),
        batchnorm=str(p.get("batchnorm", "none")),
        learning_rate=float(p.get("learning_rate", 0.01)),
        momentum=float(p.get("momentum", 0.0)),
        batch_size=int(p.get("batch_size", 128)),
        epochs=int(p.get("epochs", 30)),
        seed=seed,
    )


def _logistic_config(params: dict) -> LogisticFitConfig:
    p = dict(params)
    return LogisticFitConfig(
        ridge=float(p.get("ridge", 1e-4)),
        max_iters=int(p.get("max_iters", 5000)),
        grad_tol=float(p.get("grad_tol", 1e-6)),
        step_size=float(p.get("step_size", 1.0)),
    )


def _fit_and_score(cell: Cell, train: Dataset, test: Dataset):
    params = cell.params_dict()
    if cell.family in (GBDT_LIGHTGBM_LIKE, GBDT_CATBOOST_LIKE):
        cfg = _gbdt_config(cell.family, params)
        wds = apply_weights(train, PwsConfig(gamma=cell.gamma, mode=WEIGHTED_COST))
        model = fit_gbdt(wds, cfg)
        return predict_gbdt(model, train), predict_gbdt(model, test)
    if cell.family == LOGISTIC:
        cfg = _logistic_config(params)
        wds = apply_weights(train, PwsConfig(gamma=cell.gamma, mode=WEIGHTED_COST))
        params_hat = fit_logistic(wds, cfg)
        return predict_logistic(params_hat, train), predict_logistic(params_hat, test)
    if cell.family in (MLP_WEIGHTED_COST, MLP_RESAMPLE):
        mode = WEIGHTED_COST if cell.family == MLP_WEIGHTED_COST else RESAMPLE
        cfg = _mlp_config(params, seed=cell.seed)
        pws = PwsConfig(gamma=cell.gamma, mode=mode, seed=cell.seed)
        model = fit_mlp(train, cfg, pws)
        return predict_mlp(model, train), predict_mlp(model, test)
    raise ValueError(f"no trainer for family {cell.family!r}")


def run_cell(cell: Cell, train: Dataset, test: Dataset) -> SweepRecord:
    """Train and evaluate one cell; failures become error records."""
    record = SweepRecord(family=cell.family, params=cell.params_dict(),
                         gamma=cell.gamma, seed=cell.seed)
    start = time.perf_counter()
    try:
        scores_train, scores_test = _fit_and_score(cell, train, test)
        rep_train = metrics.report(train.labels, scores_train)
        rep_test = metrics.report(test.labels, scores_test)
        record.f1_train = rep_train.f1
        record.error_train = rep_train.error
        record.f1_test = rep_test.f1
        record.error_test = rep_test.error
        record.precision_test = rep_test.precision
        record.recall_test = rep_test.recall
        record.auc_test = rep_test.auc
    except Exception as exc:  # recorded, never aborts the sweep
        record.error_msg = f"{type(exc).__name__}: {exc}"
    record.wall_time_seconds = time.perf_counter() - start
    return record


def _sanitize(msg: str) -> str:
    return msg.replace(",", ";").replace("\n", "; ").replace("\r", "")


def _metric_cell(v) -> str:
    return "" if v is None else repr(float(v))


def csv_header(axis_names) -> str:
    return ",".join(["family", *axis_names, "gamma", "seed", *_METRIC_COLUMNS,
                     "wall_time_seconds", "error_msg"])


def record_to_csv(record: SweepRecord, axis_names) -> str:
    cells = [record.family]
    for name in axis_names:
        cells.append(_fmt_value(record.params[name]))
    cells.append(_fmt_value(float(record.gamma)))
    cells.append(str(record.seed))
    for m in _METRIC_COLUMNS:
        cells.append(_metric_cell(getattr(record, m)))
    cells.append(repr(float(record.wall_time_seconds)))
    cells.append(_sanitize(record.error_msg))
    return ",".join(cells)


def read_records(path) -> tuple[list, list]:
    """Parse a sweep CSV; returns (axis_names, records)."""
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        return [], []
    header = lines[0].split(",")
    expected_tail = ["gamma", "seed", *_METRIC_COLUMNS, "wall_time_seconds", "error_msg"]
    if header[0] != "family" or header[-len(expected_tail):] != expected_tail:
        raise ValueError(f"{path}: not a sweep record file")
    axis_names = header[1:-len(expected_tail)]
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}: malformed record line: {line!r}")
        params = {name: _parse_value(cells[1 + i]) for i, name in enumerate(axis_names)}
        base = 1 + len(axis_names)
        rec = SweepRecord(family=cells[0], params=params,
                          gamma=float(cells[base]), seed=int(cells[base + 1]))
        for i, m in enumerate(_METRIC_COLUMNS):
            cell = cells[base + 2 + i]
            setattr(rec, m, float(cell) if cell else None)
        rec.wall_time_seconds = float(cells[-2]) if cells[-2] else 0.0
        rec.error_msg = cells[-1]
        records.append(rec)
    return axis_names, records


_WORKER_DATA = {}


def _worker_init(train, test):
    _WORKER_DATA["train"] = train
    _WORKER_DATA["test"] = test


def _worker_run(cell: Cell) -> SweepRecord:
    return run_cell(cell, _WORKER_DATA["train"], _WORKER_DATA["test"])


def run_sweep(spec: GridSpec, train: Dataset, test: Dataset, out_path,
              jobs: int = 1, progress=None) -> int:
    """Train every grid cell not already present in out_path.

    Records are appended as they finish and the file is rewritten in
    sorted order at the end, so interrupted runs resume and the final
    artifact does not depend on jobs. Returns the number of new records.
    """
    if train.d != test.d:
        raise ValueError("train and test dimensions differ")
    if train.positive_count == 0 or train.negative_count == 0:
        raise ValueError("training data must contain both classes")
    cells = enumerate_grid(spec)
    axis_names = list(spec.axis_names)
    existing = []
    try:
        file_axes, existing = read_records(out_path)
        if existing and file_axes != axis_names:
            raise ValueError(
                f"{out_path} has axis columns {file_axes}, spec has {axis_names}"
            )
    except FileNotFoundError:
        pass
    # identity comparison goes through the formatted key so CSV round-trips match
    done = {r.key() for r in existing}
    todo = []
    for c in cells:
        key = (c.family, tuple((k, _fmt_value(v)) for k, v in c.params),
               _fmt_value(float(c.gamma)))
        if key not in done:
            todo.append(c)

    new_records = []
    mode = "a" if existing else "w"
    with open(out_path, mode, newline="\n") as fh:
        if not existing:
            fh.write(csv_header(axis_names) + "\n")
        if jobs <= 1:
            for i, cell in enumerate(todo):
                rec = run_cell(cell, train, test)
                new_records.append(rec)
                fh.write(record_to_csv(rec, axis_names) + "\n")
                fh.flush()
                if progress:
                    progress(i + 1, len(todo), rec)
        else:
            with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                     initargs=(train, test)) as pool:
                futures = [pool.submit(_worker_run, cell) for cell in todo]
                for i, fut in enumerate(as_completed(futures)):
                    rec = fut.result()
                    new_records.append(rec)
                    fh.write(record_to_csv(rec, axis_names) + "\n")
                    fh.flush()
                    if progress:
                        progress(i + 1, len(todo), rec)

    all_records = existing + new_records
    all_records.sort(key=lambda r: r.key())
    with open(out_path, "w", newline="\n") as fh:
        fh.write(csv_header(axis_names) + "\n")
        for rec in all_records:
            fh.write(record_to_csv(rec, axis_names) + "\n")
    return len(new_records)


def group_records(records) -> dict:
    """Group by (family, hyperparameters), i.e. everything but gamma and seed."""
    groups = {}
    for rec in records:
        key = (rec.family, tuple((k, _fmt_value(v)) for k, v in rec.params.items()))
        groups.setdefault(key, []).append(rec)
    return groups


def top_k_records(records, group: dict, k: int, mode: str,
                  family: str | None = None) -> list:
    """The k best records of one hyperparameter group by F1 in the given mode.

    Ties prefer the smaller gamma; records whose F1 is undefined rank
    below every defined value.
    """
    if mode not in ("train", "test"):
        raise ValueError("mode must be 'train' or 'test'")
    if k < 1:
        raise ValueError("k must be positive")
    want = {name: _fmt_value(v) for name, v in group.items()}
    sel = []
    for rec in records:
        if family is not None and rec.family != family:
            continue
        have = {name: _fmt_value(v) for name, v in rec.params.items()}
        if have == want:
            sel.append(rec)
    defined = [r for r in sel if r.metric("f1", mode) is not None]
    undefined = [r for r in sel if r.metric("f1", mode) is None]
    defined.sort(key=lambda r: (-r.metric("f1", mode), r.gamma))
    undefined.sort(key=lambda r: r.gamma)
    return (defined + undefined)[:k]


def best_pws(records, group: dict, k: int, mode: str) -> list:
    """(gamma, score) for the top-k records of the group."""
    return [(r.gamma, r.metric("f1", mode)) for r in top_k_records(records, group, k, mode)]


@dataclass
class TradeoffRow:
    replicate: int
    distribution: str  # "d0" or "d1"
    l2_error: float
    mse: float
    f1: float | None


@dataclass
class TradeoffStudyResult:
    """Per-replicate coefficient errors and F1 for the two training regimes."""

    rows: list = field(default_factory=list)
    replicates: int = 0
    failures: int = 0

    def paired(self, attr: str):
        """Aligned (d0, d1) arrays over completed replicates; drops pairs
        where either value is undefined."""
        by_rep = {}
        for row in self.rows:
            by_rep.setdefault(row.replicate, {})[row.distribution] = getattr(row, attr)
        d0, d1 = [], []
        for rep in sorted(by_rep):
            pair = by_rep[rep]
            if "d0" in pair and "d1" in pair and pair["d0"] is not None \
                    and pair["d1"] is not None:
                d0.append(pair["d0"])
                d1.append(pair["d1"])
        return np.asarray(d0, dtype=np.float64), np.asarray(d1, dtype=np.float64)


def run_tradeoff_study(cfg: GeneratorConfig, replicates: int, eval_n: int,
                       fit_cfg: LogisticFitConfig | None = None) -> TradeoffStudyResult:
    """Fit the linear model on raw vs rebalanced replicates of one ground truth.

    Each replicate draws a fresh imbalanced set, a fresh 50/50 rebalanced
    set of the same size, and a fresh imbalanced evaluation set; both fits
    are scored by coefficient error against the ground truth and by F1 on
    the evaluation set.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    if eval_n < 1:
        raise ValueError("eval_n must be positive")
    if fit_cfg is None:
        fit_cfg = LogisticFitConfig()
    gt = make_ground_truth(cfg)
    result = TradeoffStudyResult(replicates=replicates)
    for rep in range(replicates):
        ds0 = sample_d0(gt, cfg.n, seed=np.random.SeedSequence([cfg.seed, rep, 0]))
        ds1 = sample_d1(gt, cfg.n, 0.5, seed=np.random.SeedSequence([cfg.seed, rep, 1]))
        ev = sample_d0(gt, eval_n, seed=np.random.SeedSequence([cfg.seed, rep, 2]))
        try:
            for dist, ds in (("d0", ds0), ("d1", ds1)):
                est = fit_logistic(unit_weights(ds), fit_cfg)
                scores = predict_logistic(est, ev)
                rep_metrics = metrics.report(ev.labels, scores)
                result.rows.append(TradeoffRow(
                    replicate=rep, distribution=dist,
                    l2_error=coef_l2_error(est, gt), mse=coef_mse(est, gt),
                    f1=rep_metrics.f1,
                ))
        except RuntimeError:
            result.rows = [r for r in result.rows if r.replicate != rep]
            result.failures += 1
    return result


def write_tradeoff_csvs(result: TradeoffStudyResult, out_dir, bins: int = 20) -> dict:
    """Per-replicate, histogram-bin, and scatter CSVs for plotting."""
    import os

    paths = {
        "replicates": os.path.join(out_dir, "replicates.csv"),
        "histogram": os.path.join(out_dir, "histogram.csv"),
        "scatter": os.path.join(out_dir, "scatter.csv"),
    }
    with open(paths["replicates"], "w", newline="\n") as fh:
        fh.write("replicate,distribution,l2_error,mse,f1\n")
        for row in result.rows:
            f1_cell = "" if row.f1 is None else repr(float(row.f1))
            fh.write(f"{row.replicate},{row.distribution},"
                     f"{row.l2_error!r},{row.mse!r},{f1_cell}\n")
    l2_all = np.asarray([r.l2_error for r in result.rows], dtype=np.float64)
    with open(paths["histogram"], "w", newline="\n") as fh:
        fh.write("distribution,bin_left,bin_right,count\n")
        if len(l2_all):
            edges = np.histogram_bin_edges(l2_all, bins=bins)
            for dist in ("d0", "d1"):
                vals = [r.l2_error for r in result.rows if r.distribution == dist]
                counts, _ = np.histogram(vals, bins=edges)
                for i, c in enumerate(counts):
                    fh.write(f"{dist},{edges[i]!r},{edges[i + 1]!r},{int(c)}\n")
    with open(paths["scatter"], "w", newline="\n") as fh:
        fh.write("distribution,f1,mse\n")
        for row in result.rows:
            if row.f1 is not None:
                fh.write(f"{row.distribution},{float(row.f1)!r},{row.mse!r}\n")
    return paths
