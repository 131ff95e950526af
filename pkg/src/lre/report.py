"""CSV export of trial results and the error-vs-t plot."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

from .evaluation import AggregateReport, TrialReport

TRIAL_COLUMNS = ("scenario", "method", "alpha", "beta", "a", "t0", "sigma", "lambda", "M", "seed", "t", "error")
AGGREGATE_COLUMNS = ("scenario", "method", "alpha", "beta", "t", "mean_error", "std_error", "n_trials")


class MalformedCSVError(ValueError):
    pass


def fmt_float(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _fmt_int(x) -> str:
    return "" if x is None else str(int(x))


def _write(path: Path, columns: Sequence[str], rows: Iterable[Sequence[str]]):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    # newline="" keeps LF endings on every platform
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def trial_rows(report: TrialReport) -> list[list[str]]:
    c = report.config
    rows = []
    for t, err in zip(report.checkpoints, report.errors):
        rows.append([
            report.scenario,
            report.method,
            fmt_float(c.get("alpha")),
            fmt_float(c.get("beta")),
            fmt_float(c.get("a")),
            _fmt_int(c.get("t0")),
            fmt_float(c.get("sigma")),
            fmt_float(c.get("lam")),
            _fmt_int(c.get("M")),
            _fmt_int(c.get("seed")),
            str(t),
            fmt_float(err),
        ])
    return rows


def write_trials_csv(path: Path, reports: Iterable[TrialReport]):
    rows = [row for r in reports for row in trial_rows(r)]
    _write(path, TRIAL_COLUMNS, rows)


def write_aggregate_csv(path: Path, aggregates: Iterable[AggregateReport]):
    rows = []
    for ag in aggregates:
        for t, m, s in zip(ag.checkpoints, ag.mean, ag.std):
            rows.append([ag.scenario, ag.method, fmt_float(ag.alpha), fmt_float(ag.beta), str(t),
                         fmt_float(m), fmt_float(s), str(ag.n_trials)])
    _write(path, AGGREGATE_COLUMNS, rows)


def read_csv(path: Path, columns: Sequence[str]) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in columns if c not in header]
            if missing:
                raise MalformedCSVError(f"{path}: missing column(s) {', '.join(missing)}")
            rows = []
            for i, row in enumerate(reader, start=2):
                if None in row or any(v is None for v in row.values()):
                    raise MalformedCSVError(f"{path}:{i}: wrong number of fields")
                rows.append(row)
    except OSError as exc:
        raise MalformedCSVError(f"{path}: {exc.strerror}") from None
    except csv.Error as exc:
        raise MalformedCSVError(f"{path}: {exc}") from None
    return rows


def read_aggregate_csv(path: Path) -> dict[str, dict[str, list[float]]]:
    """Curves keyed by method id, in order of first appearance."""
    rows = read_csv(path, AGGREGATE_COLUMNS)
    if not rows:
        raise MalformedCSVError(f"{path}: no data rows")
    curves: dict[str, dict[str, list[float]]] = {}
    for i, row in enumerate(rows, start=2):
        try:
            t = float(row["t"])
            mean = float(row["mean_error"])
            std = float(row["std_error"])
        except ValueError:
            raise MalformedCSVError(f"{path}:{i}: non-numeric t/mean_error/std_error") from None
        if not (t > 0 and math.isfinite(mean)):
            raise MalformedCSVError(f"{path}:{i}: t must be positive and mean_error finite")
        c = curves.setdefault(row["method"], {"t": [], "mean": [], "std": []})
        c["t"].append(t)
        c["mean"].append(mean)
        c["std"].append(std)
    return curves


def plot_aggregate(csv_path: Path, svg_path: Path):
    """Log-log mean error against t with +-1 std bands, one curve per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    curves = read_aggregate_csv(csv_path)
    with matplotlib.rc_context({"svg.fonttype": "none", "svg.hashsalt": "lre"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, c in curves.items():
            t = np.array(c["t"])
            mean = np.array(c["mean"])
            std = np.nan_to_num(np.array(c["std"]))
            (line,) = ax.plot(t, mean, marker="o", ms=3, label=name)
            lo = np.maximum(mean - std, mean * 1e-3)
            ax.fill_between(t, lo, mean + std, color=line.get_color(), alpha=0.2, lw=0)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("pairs processed t")
        ax.set_ylabel(r"$E_{p^\alpha}[(f_t - r^\alpha)^2]$")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
