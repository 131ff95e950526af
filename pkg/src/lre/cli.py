"""
Command-line entry point.

    lre run <config> [--jobs N] [--verbose]
    lre select <config> [--verbose]
    lre plot <aggregate.csv> <out.svg>

Exit codes: 0 on success, 1 when a trial hit a numerical failure (partial
results and ``failures.txt`` are still written), 2 for invalid input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import rulsif
from .errors import InvalidInputError, NumericalError
from .evaluation import (
    OLREMethod,
    TestSet,
    aggregate,
    cv_plan,
    make_test_set,
    run_trial,
    trial_streams,
)
from .kernel import KernelSpec
from .olre import OLREConfig
from .report import MalformedCSVError, fmt_float, plot_aggregate, write_aggregate_csv, write_trials_csv
from .runconfig import ConfigError, RunConfig, format_config, load_config

log = logging.getLogger("lre")

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2

TRIALS_CSV = "trials.csv"
AGGREGATE_CSV = "aggregate.csv"
RESOLVED_CONFIG = "resolved_config.txt"
FAILURES = "failures.txt"
CV_TABLE_CSV = "cv_table.csv"
SELECTION_CSV = "selection.csv"


def _run_one_trial(cfg: RunConfig, test: TestSet, i: int):
    """All methods for trial ``i``; failures are returned, not raised."""
    seed = cfg.trial_seed(i)
    out = []
    for m in cfg.methods:
        try:
            rep = run_trial(cfg.scenario, m, cfg.T, cfg.checkpoints, test, seed, cfg.protocol)
            out.append((m.name, rep, None))
        except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out.append((m.name, None, f"{type(exc).__name__}: {exc}"))
    log.info("trial %d (seed %d) done", i, seed)
    return out


def _warn_theory_gaps(cfg: RunConfig):
    for m in cfg.methods:
        if isinstance(m, OLREMethod):
            bound = OLREConfig(m.alpha, KernelSpec(1.0), m.beta, m.a, m.t0).convergence_t0_bound()
            if m.t0 < bound:
                log.warning(
                    "method %s: t0=%d is below %.0f, the warm-up offset the L2 convergence bound assumes "
                    "for a=%g, beta=%g", m.name, m.t0, bound, m.a, m.beta,
                )


def cmd_run(config_path: str, jobs: int = 1) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        for p in exc.problems:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    _warn_theory_gaps(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    test = make_test_set(cfg.scenario, cfg.n_test, cfg.test_seed)
    indices = range(cfg.n_trials)
    if jobs > 1 and cfg.n_trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one_trial, [cfg] * cfg.n_trials, [test] * cfg.n_trials, indices))
    else:
        results = [_run_one_trial(cfg, test, i) for i in indices]

    # outputs are assembled in (trial, method) order regardless of worker scheduling
    reports = []
    failures = []
    for i, trial in enumerate(results):
        for name, rep, err in trial:
            if rep is None:
                failures.append((i, cfg.trial_seed(i), name, err))
            else:
                reports.append(rep)

    write_trials_csv(out / TRIALS_CSV, reports)
    aggregates = []
    for m in cfg.methods:
        mine = [r for r in reports if r.method == m.name]
        if mine:
            aggregates.append(aggregate(mine))
    write_aggregate_csv(out / AGGREGATE_CSV, aggregates)
    (out / RESOLVED_CONFIG).write_text(format_config(cfg))

    if failures:
        lines = ["trial,seed,method,error"] + [f"{i},{s},{n},{e!r}" for i, s, n, e in failures]
        (out / FAILURES).write_text("\n".join(lines) + "\n")
        print(f"{len(failures)} trial(s) failed; see {out / FAILURES}", file=sys.stderr)
        return EXIT_FAILED
    print(f"wrote {out / TRIALS_CSV} and {out / AGGREGATE_CSV}")
    return EXIT_OK


def cmd_select(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        for p in exc.problems:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    protocol = cfg.protocol
    wanted = []
    for m in cfg.methods:
        needs_lambda = getattr(m, "lam", 0.0) is None
        if (cfg.sigma is None or needs_lambda) and m.alpha not in wanted:
            wanted.append(m.alpha)
    if not wanted:
        print("nothing to select: sigma and every RULSIF lambda are fixed (use 'cv')", file=sys.stderr)
        return EXIT_INVALID

    # the first n_warmup pairs of trial 0, exactly as 'run' sees them
    streams = trial_streams(cfg.scenario, cfg.trial_seed(0), 0, protocol)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_rows = []
    chosen = []
    for alpha in wanted:
        try:
            plan = cv_plan(protocol, streams.warm_X, streams.warm_X_prime, cfg.sigma)
            res = rulsif.cross_validate(streams.warm_X, streams.warm_X_prime, plan, alpha, cfg.cv_M,
                                        np.random.default_rng(streams.cv_seed))
        except InvalidInputError as exc:
            print(f"insufficient warm-up samples: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except NumericalError as exc:
            print(f"selection failed for alpha={alpha}: {exc}", file=sys.stderr)
            return EXIT_FAILED
        for cell in res.table:
            table_rows.append([fmt_float(alpha), str(cell.sigma_index), str(cell.lambda_index),
                               fmt_float(cell.sigma), fmt_float(cell.lam),
                               "" if cell.failed else fmt_float(cell.mean_score),
                               "failed" if cell.failed else "ok"])
        chosen.append((alpha, res.best_sigma, res.best_lambda))
        print(f"alpha={alpha:g}: sigma*={res.best_sigma:.6g} lambda*={res.best_lambda:.6g}")
        for cell in res.table:
            score = "failed" if cell.failed else f"{cell.mean_score:.6g}"
            print(f"    sigma={cell.sigma:<12.6g} lambda={cell.lam:<10.6g} score={score}")

    with open(out / CV_TABLE_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "sigma_index", "lambda_index", "sigma", "lambda", "mean_score", "status"])
        w.writerows(table_rows)
    with open(out / SELECTION_CSV, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "sigma", "lambda"])
        w.writerows([[fmt_float(a), fmt_float(s), fmt_float(lam)] for a, s, lam in chosen])
    return EXIT_OK


def cmd_plot(csv_path: str, svg_path: str) -> int:
    try:
        plot_aggregate(Path(csv_path), Path(svg_path))
    except MalformedCSVError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lre", description="Online likelihood-ratio estimation experiments")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all (method x trial) combinations of a config")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", "-j", type=int, default=1, help="worker processes (default 1)")

    p_sel = sub.add_parser("select", help="cross-validate sigma/lambda on the warm-up pairs")
    p_sel.add_argument("config")

    p_plot = sub.add_parser("plot", help="render an aggregate CSV as an SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("svg")

    for p in (p_run, p_sel, p_plot):
        p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        if args.jobs < 1:
            print("--jobs must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        return cmd_run(args.config, args.jobs)
    if args.command == "select":
        return cmd_select(args.config)
    return cmd_plot(args.csv, args.svg)


if __name__ == "__main__":
    sys.exit(main())
