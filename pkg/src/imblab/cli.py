"""Command-line entry point: gen-data, tradeoff, sweep, analyze.

Every command resolves its full configuration (flags over grid-file over
built-in defaults), writes a manifest before any long computation, and
exits 0 iff all requested work completed; directional verdicts are
reported in output files and never change the exit code. The IMBLAB_SEED
environment variable supplies the default base seed.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from imblab import __version__, analysis, sweep
from imblab.dataio import (GeneratorConfig, load_csv, make_ground_truth, sample_d0,
                           save_csv)

_DESK_GBDT_AXES = {
    "n_estimators": (4, 12, 36),
    "learning_rate": (0.1, 0.3),
    "max_depth": (2, 4),
    "max_leaves": (4, 12),
}
_DESK_MLP_AXES = {
    "hidden_size": (4, 16),
    "n_layers": (1, 2),
    "init_scale": (1.0,),
    "batchnorm": ("none",),
    "learning_rate": (0.05,),
    "momentum": (0.9,),
    "batch_size": (64,),
    "epochs": (8,),
}
_DESK_LOGISTIC_AXES = {"ridge": (1e-4, 1e-2), "max_iters": (500,)}


def desk_axes(family: str) -> dict:
    if family in (sweep.GBDT_LIGHTGBM_LIKE, sweep.GBDT_CATBOOST_LIKE):
        axes = dict(_DESK_GBDT_AXES)
        if family == sweep.GBDT_CATBOOST_LIKE:
            axes.pop("max_leaves")
        return axes
    if family in (sweep.MLP_WEIGHTED_COST, sweep.MLP_RESAMPLE):
        return dict(_DESK_MLP_AXES)
    return dict(_DESK_LOGISTIC_AXES)


def _default_seed() -> int:
    return int(os.environ.get("IMBLAB_SEED", "0"))


def _write_manifest(path, command, config, outputs):
    manifest = {
        "command": command,
        "artifact_version": __version__,
        "config": config,
        "outputs": sorted(outputs),
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_pws_grid(text: str) -> tuple:
    if text == "coarse":
        return sweep.COARSE_PWS_GRID
    if text == "full":
        return sweep.FULL_PWS_GRID
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"--pws-grid must be 'coarse', 'full', or numbers: {text!r}") from None
    return values


def _parse_grid_file(path) -> dict:
    axes = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected axis=v1,v2,...")
            name, values = line.split("=", 1)
            axes[name.strip()] = tuple(
                sweep._parse_value(v.strip()) for v in values.split(",")
            )
    return axes


def cmd_gen_data(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = {os.path.join(args.out_dir, name)
               for name in ("train.csv", "test.csv", "truth.csv")}
    config = {"d": args.d, "n_train": args.n_train, "n_test": args.n_test,
              "positive_rate": args.positive_rate, "seed": args.seed,
              "out_dir": args.out_dir}
    _write_manifest(os.path.join(args.out_dir, "manifest.json"),
                    "gen-data", config, outputs)
    cfg = GeneratorConfig(d=args.d, n=args.n_train,
                          target_positive_rate=args.positive_rate, seed=args.seed)
    gt = make_ground_truth(cfg)
    train = sample_d0(gt, args.n_train, seed=np.random.SeedSequence([args.seed, 0]))
    test = sample_d0(gt, args.n_test, seed=np.random.SeedSequence([args.seed, 1]))
    save_csv(train, os.path.join(args.out_dir, "train.csv"))
    save_csv(test, os.path.join(args.out_dir, "test.csv"))
    with open(os.path.join(args.out_dir, "truth.csv"), "w", newline="\n") as fh:
        fh.write("coefficient,value\n")
        fh.write(f"intercept,{gt.omega0!r}\n")
        for j, w in enumerate(gt.omega):
            fh.write(f"f{j},{float(w)!r}\n")
    print(f"wrote {train.n} train rows ({train.positive_count} positive) and "
          f"{test.n} test rows to {args.out_dir}")
    return 0


def cmd_tradeoff(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = {os.path.join(args.out_dir, name)
               for name in ("replicates.csv", "histogram.csv", "scatter.csv",
                            "summary.json")}
    config = {"d": args.d, "n": args.n, "replicates": args.replicates,
              "eval_n": args.eval_n, "positive_rate": args.positive_rate,
              "seed": args.seed, "out_dir": args.out_dir}
    _write_manifest(os.path.join(args.out_dir, "manifest.json"),
                    "tradeoff", config, outputs)
    cfg = GeneratorConfig(d=args.d, n=args.n,
                          target_positive_rate=args.positive_rate, seed=args.seed)
    result = sweep.run_tradeoff_study(cfg, args.replicates, args.eval_n)
    sweep.write_tradeoff_csvs(result, args.out_dir)
    summary = analysis.summarize_tradeoff(result)
    with open(os.path.join(args.out_dir, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if summary["low_power"]:
        print("warning: low power; too few paired replicates for a stable verdict",
              file=sys.stderr)
    for key in ("mean_l2_d0", "mean_l2_d1", "mean_f1_d0", "mean_f1_d1",
                "l2_p", "f1_p", "l2_direction_confirmed", "f1_direction_confirmed"):
        if key in summary:
            print(f"{key} = {summary[key]}")
    return 0


def _baseline_row(records, gamma_target):
    candidates = [r for r in records if r.f1_test is not None]
    if not candidates:
        return None
    gammas = sorted({r.gamma for r in candidates})
    nearest = min(gammas, key=lambda g: (abs(g - gamma_target), g))
    at_gamma = [r for r in candidates if r.gamma == nearest]
    return max(at_gamma, key=lambda r: r.f1_test), nearest


def _print_sweep_summary(records):
    scored = [r for r in records if r.f1_test is not None]
    if not scored:
        print("no scored records; nothing to summarize")
        return
    best = max(scored, key=lambda r: r.f1_test)
    print("summary (best test F1):")
    rows = [("opt", best, best.gamma)]
    for target in (10.0, 100.0):
        found = _baseline_row(scored, target)
        if found:
            rec, used = found
            label = f"fixed-{target:g}" + ("" if used == target else f" (nearest gamma {used:g})")
            rows.append((label, rec, used))
    for label, rec, gamma in rows:
        print(f"  {label}: f1_test={rec.f1_test:.4f} gamma={gamma:g} "
              f"f1_train={_opt(rec.f1_train)} error_test={_opt(rec.error_test)} "
              f"precision={_opt(rec.precision_test)} recall={_opt(rec.recall_test)} "
              f"auc={_opt(rec.auc_test)}")


def _opt(v) -> str:
    return "undef" if v is None else f"{v:.4f}"


def cmd_sweep(args) -> int:
    axes = desk_axes(args.family)
    if args.grid_file:
        axes.update(_parse_grid_file(args.grid_file))
    pws_grid = _parse_pws_grid(args.pws_grid)
    spec = sweep.GridSpec(family=args.family, axes=axes, pws_grid=pws_grid,
                          base_seed=args.seed)
    config = {"family": args.family, "train": args.train, "test": args.test,
              "out": args.out, "grid_file": args.grid_file,
              "axes": {k: list(v) for k, v in spec.axes.items()},
              "pws_grid": list(spec.pws_grid), "seed": args.seed, "jobs": args.jobs}
    _write_manifest(args.out + ".manifest.json", "sweep", config, {args.out})
    train = load_csv(args.train)
    test = load_csv(args.test)

    t0 = time.perf_counter()

    def progress(done, total, rec):
        if done == total or done % 25 == 0:
            elapsed = time.perf_counter() - t0
            print(f"  {done}/{total} cells ({elapsed:.1f}s)", file=sys.stderr)

    written = sweep.run_sweep(spec, train, test, args.out, jobs=args.jobs,
                              progress=progress)
    _, records = sweep.read_records(args.out)
    failures = [r for r in records if r.error_msg]
    print(f"wrote {written} new records ({len(records)} total, "
          f"{len(failures)} recorded failures) to {args.out}")
    _print_sweep_summary(records)
    return 0


def cmd_analyze(args) -> int:
    config = {"sweep": args.sweep, "family": args.family, "k": args.k,
              "mode": args.mode, "min_estimators": args.min_estimators,
              "with_ensemble_covariate": args.with_ensemble_covariate,
              "out": args.out}
    _write_manifest(args.out + ".manifest.json", "analyze", config, {args.out})
    _, records = sweep.read_records(args.sweep)
    results = analysis.analyze_family(
        records, args.family, args.k, args.mode,
        min_estimators=args.min_estimators,
        with_ensemble=args.with_ensemble_covariate,
    )
    analysis.results_to_csv(results, args.out)
    print(f"family: {args.family}")
    print(analysis.format_table(results), end="")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imblab",
        description="Positive-weight-scalar experiments for imbalanced classification",
    )
    parser.add_argument("--version", action="version", version=f"imblab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a seeded synthetic dataset pair")
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--n-train", type=int, default=20000)
    p.add_argument("--n-test", type=int, default=20000)
    p.add_argument("--positive-rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("tradeoff", help="raw-vs-rebalanced bias/variance study")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--eval-n", type=int, default=4000)
    p.add_argument("--positive-rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("sweep", help="hyperparameter x gamma sweep to CSV")
    p.add_argument("--family", required=True, choices=sweep.FAMILIES)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-file", default=None,
                   help="axis overrides, one 'axis=v1,v2,...' per line")
    p.add_argument("--pws-grid", default="coarse",
                   help="'coarse', 'full', or comma-separated gamma values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="regress best gamma on hyperparameters")
    p.add_argument("--sweep", required=True)
    p.add_argument("--family", required=True,
                   choices=tuple(analysis.COVARIATES))
    p.add_argument("--k", type=int, nargs="+", default=[1, 3, 5])
    p.add_argument("--mode", nargs="+", default=["train", "test"],
                   choices=["train", "test"])
    p.add_argument("--min-estimators", type=int, default=None)
    p.add_argument("--with-ensemble-covariate", action="store_true")
    p.add_argument("--out", default="regression.csv")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = _default_seed()
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
