"""
commands.py  –  command-line surface
------------------------------------
fit / predict / evaluate / synth / sweep / export / bench.

Exit codes
• 0  success
• 2  bad arguments, unreadable data or model, fitting error
• 3  fitted, but fewer than k leaves could be grown
"""

import argparse
import logging
import math
import sys
import time
from datetime import datetime, timezone

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from clustering.grow import fit_ifct
from clustering.prune import fit_ifct_p
from clustering.tree import FitConfig, sens_weights_by_name
from dataio.dataset import Dataset, load_csv
from dataio.schema import load_schema
from dataio.synthetic import default_centers, generate_synthetic, write_synthetic
from evaluation.report import build_report, write_leaf_table, write_report
from modelio.document import load_model, save_model
from modelio.export import export_dot, export_rules
from modelio.predict import encode_dataset, predict_batch, write_predictions
from utils.errors import ConfigError, FairTreeError
from utils.logs import setup_logging, thread_limit
from utils.pathfinder import output_path, sibling_path

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_EXHAUSTED = 3

SWEEP_METRICS = ("ACC", "NMI", "BAL", "MNCE", "compactness", "fairness")


def status(message: str) -> None:
    """Short progress line for the user; stdout stays reserved for results."""
    print(message, file=sys.stderr)


# ───────────────────────── argument parsing ──────────────────────────
def parse_floats(text: str, what: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got '{text}'") from None
    if not values:
        raise ConfigError(f"{what}: no values given")
    return values


def parse_ints(text: str, what: str) -> list[int]:
    values = parse_floats(text, what)
    if any(v != int(v) or v < 1 for v in values):
        raise ConfigError(f"{what}: expected positive integers, got '{text}'")
    return [int(v) for v in values]


def parse_weights(text: str | None) -> dict[str, float] | None:
    """`u1=0.5,u2=0.5` -> {"u1": 0.5, "u2": 0.5}."""
    if text is None:
        return None
    named = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"--weights: expected name=value pairs, got '{part}'")
        try:
            named[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--weights: '{value}' is not a number") from None
    return named


def log_range(text: str) -> list[float]:
    """`START:STOP:NUM` exponents -> NUM values from 10^START to 10^STOP."""
    parts = text.split(":")
    try:
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise ConfigError(f"--log-range: expected START:STOP:NUM, got '{text}'") from None
    if len(parts) != 3 or num < 1:
        raise ConfigError(f"--log-range: expected START:STOP:NUM with NUM >= 1, got '{text}'")
    return [float(v) for v in np.logspace(start, stop, num)]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--schema", required=True, help="JSON file mapping column -> role")


def _add_fit_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True, help="number of clusters (leaves)")
    p.add_argument("--weights", help="per-attribute fairness weights, e.g. sex=0.5,age=0.5")
    p.add_argument("--standardize", action="store_true", help="scale numerical columns to mean 0, variance 1")
    p.add_argument("--cat-cap", type=int, default=12, help="max categories before one-vs-rest subsets")
    p.add_argument("--n-min", type=int, default=1, help="minimum samples per child")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairtree",
        description="Fair and interpretable clustering with decision trees",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a clustering tree and write the model")
    p.add_argument("--algo", choices=["ifct", "ifct-p"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="fairness weight (ifct only)")
    _add_data_args(p)
    _add_fit_args(p)
    p.add_argument("--out", required=True, help="model JSON path; report files are written next to it")
    p.add_argument("--timestamp", action="store_true", help="record the fit time in the model")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("predict", help="assign clusters to the rows of a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--permissive-predict", action="store_true", help="route unknown categories right")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model on labelled data")
    p.add_argument("--model", required=True)
    _add_data_args(p)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--permissive-predict", action="store_true")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("synth", help="generate Gaussian blobs with a random binary group")
    p.add_argument("--blobs", type=int, default=4)
    p.add_argument("--n", type=int, default=400, help="samples per blob")
    p.add_argument("--p", default="0.5", help="probability of group 1, one value or one per blob")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stddev", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=6.0, help="radius of the circle holding the blob centers")
    p.add_argument("--out", required=True, help="data CSV path")
    p.add_argument("--schema-out", help="schema JSON path (default: next to --out)")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("sweep", help="fit IFCT over a grid of lambda values")
    _add_data_args(p)
    _add_fit_args(p)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--lambdas", help="comma-separated lambda values")
    grid.add_argument("--log-range", help="START:STOP:NUM exponents of ten, e.g. 2:6:5")
    p.add_argument("--parallel", action="store_true", help="fit grid points in parallel (FAIRTREE_THREADS workers)")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("export", help="print a model as rules or as a DOT graph")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=["rules", "dot"], default="rules")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(handler=cmd_export)

    p = sub.add_parser("bench", help="time fits on synthetic data of growing size")
    p.add_argument("--sizes", default="1000,2000,4000", help="comma-separated sample counts")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--blobs", type=int, default=4)
    p.add_argument("--algo", choices=["ifct", "ifct-p"], default="ifct")
    p.add_argument("--lambda", dest="lam", type=float, default=1e4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(handler=cmd_bench)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        output_path(out).write_text(text, encoding="utf-8")


def _emit_frame(frame: pd.DataFrame, out: str | None) -> None:
    if out is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        frame.to_csv(output_path(out), index=False, lineterminator="\n")


def _fit_config(args, ds: Dataset, lam: float) -> FitConfig:
    named = parse_weights(args.weights)
    weights = sens_weights_by_name(ds.features, named) if named is not None else None
    return FitConfig(
        k=args.k,
        lam=lam,
        weights=weights,
        n_min=args.n_min,
        cat_cap=args.cat_cap,
        standardize=args.standardize,
    )


# ─────────────────────────────── fit ─────────────────────────────────
def cmd_fit(args) -> int:
    if args.algo == "ifct" and args.lam is None:
        raise ConfigError("--lambda is required for --algo ifct")
    if args.algo == "ifct-p" and args.lam is not None:
        raise ConfigError("--algo ifct-p has no fairness parameter; drop --lambda")

    ds = load_csv(args.data, load_schema(args.schema))
    cfg = _fit_config(args, ds, args.lam or 0.0)
    status(f"🌱 Fitting {args.algo.upper()} with k={cfg.k} on {ds.n} samples ...")
    started = time.perf_counter()
    tree = fit_ifct(ds, cfg, log=status) if args.algo == "ifct" else fit_ifct_p(ds, cfg, log=status)
    elapsed = time.perf_counter() - started
    if args.timestamp:
        tree.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    save_model(tree, args.out)
    report = build_report(tree, ds, tree.fitted_labels(), fit_seconds=elapsed)
    write_report(report, sibling_path(args.out, ".report.json"))
    write_leaf_table(report, sibling_path(args.out, ".leaves.csv"))
    sys.stdout.write(report.to_text())
    status(f"✅ Model written to {args.out}")
    if tree.exhausted:
        status(f"⚠️ Only {tree.k} of {cfg.k} leaves: no leaf had a feasible split left")
        return EXIT_EXHAUSTED
    return EXIT_OK


# ──────────────────────── predict / evaluate ─────────────────────────
def cmd_predict(args) -> int:
    tree = load_model(args.model)
    frame = predict_batch(tree, args.data, permissive=args.permissive_predict)
    write_predictions(frame, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    tree = load_model(args.model)
    ds = load_csv(args.data, load_schema(args.schema))
    encoded = encode_dataset(tree, ds, permissive=args.permissive_predict)
    pred = tree.assign(*encoded)
    report = build_report(tree, ds, pred, encoded=encoded)
    if args.out:
        write_report(report, args.out)
    sys.stdout.write(report.to_text())
    return EXIT_OK


# ─────────────────────────────── synth ───────────────────────────────
def cmd_synth(args) -> int:
    probs = parse_floats(args.p, "--p")
    p = probs[0] if len(probs) == 1 else probs
    ds = generate_synthetic(
        args.n,
        default_centers(args.blobs, args.radius),
        blob_stddev=args.stddev,
        p=p,
        seed=args.seed,
    )
    schema_out = args.schema_out or sibling_path(args.out, ".schema.json")
    write_synthetic(ds, args.out, schema_out)
    status(f"✅ {ds.n} rows written to {args.out}, schema to {schema_out}")
    return EXIT_OK


# ─────────────────────────────── sweep ───────────────────────────────
def sweep_point(ds: Dataset, cfg: FitConfig) -> dict[str, float]:
    tree = fit_ifct(ds, cfg)
    report = build_report(tree, ds, tree.fitted_labels())
    average = report.fairness.get("average", {})
    return {
        "lambda": cfg.lam,
        "ACC": report.accuracy if report.accuracy is not None else math.nan,
        "NMI": report.nmi if report.nmi is not None else math.nan,
        "BAL": average.get("BAL", math.nan),
        "MNCE": average.get("MNCE", math.nan),
        "compactness": report.total_compactness,
        "fairness": report.total_fairness,
    }


def normalize_by_max(frame: pd.DataFrame, columns=SWEEP_METRICS) -> pd.DataFrame:
    """Append `<metric>_norm` columns: each value over its column maximum."""
    out = frame.copy()
    for column in columns:
        peak = out[column].max()
        out[f"{column}_norm"] = out[column] / peak if peak > 0 else out[column]
    return out


def cmd_sweep(args) -> int:
    grid = parse_floats(args.lambdas, "--lambdas") if args.lambdas is not None else log_range(args.log_range)
    ds = load_csv(args.data, load_schema(args.schema))
    configs = [_fit_config(args, ds, lam) for lam in grid]
    n_jobs = thread_limit() if args.parallel else 1
    status(f"🔁 Sweeping {len(configs)} lambda value(s) with {n_jobs} worker(s) ...")
    rows = Parallel(n_jobs=n_jobs)(delayed(sweep_point)(ds, cfg) for cfg in configs)
    _emit_frame(normalize_by_max(pd.DataFrame(rows)), args.out)
    return EXIT_OK


# ────────────────────────────── export ───────────────────────────────
def cmd_export(args) -> int:
    tree = load_model(args.model)
    _emit(export_dot(tree) if args.format == "dot" else export_rules(tree), args.out)
    return EXIT_OK


# ─────────────────────────────── bench ───────────────────────────────
def bench_rows(sizes: list[int], k: int, blobs: int, algo: str, lam: float, seed: int) -> pd.DataFrame:
    fit = fit_ifct if algo == "ifct" else fit_ifct_p
    rows = []
    previous = None
    for n in sizes:
        ds = generate_synthetic(max(1, n // blobs), default_centers(blobs), seed=seed)
        cfg = FitConfig(k=k, lam=lam if algo == "ifct" else 0.0)
        started = time.perf_counter()
        fit(ds, cfg)
        seconds = time.perf_counter() - started
        rows.append({"n": ds.n, "seconds": seconds, "ratio": seconds / previous if previous else math.nan})
        logger.info("bench n=%d: %.4f s", ds.n, seconds)
        previous = seconds
    return pd.DataFrame(rows)


def cmd_bench(args) -> int:
    sizes = parse_ints(args.sizes, "--sizes")
    _emit_frame(bench_rows(sizes, args.k, args.blobs, args.algo, args.lam, args.seed), args.out)
    return EXIT_OK


# ─────────────────────────────── main ────────────────────────────────
def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except FairTreeError as e:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_ERROR
