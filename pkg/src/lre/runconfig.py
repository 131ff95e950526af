"""
Experiment configuration files.

A config is a flat ``key = value`` text file.  ``#`` starts a comment, blank
lines are ignored, and every key may appear once except ``method``, which is
repeated once per estimator::

    scenario = ExpI
    T = 2000
    n_trials = 20
    seed = 1000
    sigma = cv
    method = olre alpha=0.1 beta=0.5 a=4 t0=100
    method = rulsif alpha=0.1 lambda=cv M=50

Unknown keys, bad values and violated preconditions are all reported with
their line numbers before any work starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from . import rulsif
from .evaluation import (
    DEFAULT_CHECKPOINTS,
    DEFAULT_N_TEST,
    DEFAULT_N_TRIALS,
    DEFAULT_T,
    OLREMethod,
    Protocol,
    RulsifMethod,
)
from .synthetic import SCENARIOS, ScenarioSpec


class ConfigError(Exception):
    """Invalid configuration; ``problems`` holds one message per issue."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


@dataclass
class RunConfig:
    scenario: ScenarioSpec
    methods: list
    T: int = DEFAULT_T
    n_test: int = DEFAULT_N_TEST
    n_trials: int = DEFAULT_N_TRIALS
    checkpoints: tuple[int, ...] = ()
    seed: int = 1
    sigma: float | None = None
    reuse_warmup_pairs: bool = False
    n_warmup: int = 100
    cv_folds: int = rulsif.DEFAULT_FOLDS
    sigma_scales: tuple[float, ...] = rulsif.DEFAULT_SIGMA_SCALES
    sigma_grid: tuple[float, ...] | None = None
    lambda_grid: tuple[float, ...] = rulsif.DEFAULT_LAMBDA_GRID
    cv_M: int = 50
    output_dir: Path = field(default_factory=lambda: Path("results"))

    @property
    def protocol(self) -> Protocol:
        return Protocol(
            sigma=self.sigma,
            n_warmup=self.n_warmup,
            reuse_warmup_pairs=self.reuse_warmup_pairs,
            cv_folds=self.cv_folds,
            sigma_scales=self.sigma_scales,
            sigma_grid=self.sigma_grid,
            lambda_grid=self.lambda_grid,
            cv_M=self.cv_M,
        )

    def trial_seed(self, i: int) -> int:
        return self.seed + i

    @property
    def test_seed(self) -> int:
        return self.seed - 1


def default_checkpoints(T: int) -> tuple[int, ...]:
    cps = [c for c in DEFAULT_CHECKPOINTS if c < T]
    return tuple(cps + [T])


# -- value parsers (raise ValueError with a short reason) -----------------------

def _int(v: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ValueError(f"expected an integer, got {v!r}") from None


def _float(v: str) -> float:
    try:
        x = float(v)
    except ValueError:
        raise ValueError(f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _list(conv):
    def parse(v: str):
        items = [s.strip() for s in v.split(",") if s.strip()]
        if not items:
            raise ValueError("expected a comma-separated list")
        return tuple(conv(s) for s in items)
    return parse


def _float_or_cv(v: str) -> float | None:
    return None if v.lower() == "cv" else _float(v)


_KEYS = {
    "scenario": str,
    "dim": _int,
    "T": _int,
    "n_test": _int,
    "n_trials": _int,
    "checkpoints": _list(_int),
    "seed": _int,
    "sigma": _float_or_cv,
    "reuse_warmup_pairs": _bool,
    "n_warmup": _int,
    "cv_folds": _int,
    "sigma_scales": _list(_float),
    "sigma_grid": _list(_float),
    "lambda_grid": _list(_float),
    "cv_M": _int,
    "output_dir": str,
}

_METHOD_KEYS = {
    "olre": {"alpha": _float, "beta": _float, "a": _float, "t0": _int, "id": str},
    "rulsif": {"alpha": _float, "lambda": _float_or_cv, "M": _int, "id": str},
}


def _parse_method(value: str) -> tuple[str, dict[str, object]]:
    tokens = value.split()
    if not tokens:
        raise ValueError("empty method specification")
    kind = tokens[0].lower()
    if kind not in _METHOD_KEYS:
        raise ValueError(f"unknown method {tokens[0]!r} (expected olre or rulsif)")
    params: dict[str, object] = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in _METHOD_KEYS[kind]:
            raise ValueError(f"unknown {kind} parameter {k!r}")
        if k in params:
            raise ValueError(f"parameter {k!r} given twice")
        try:
            params[k] = _METHOD_KEYS[kind][k](v)
        except ValueError as exc:
            raise ValueError(f"parameter {k!r}: {exc}") from None
    if "alpha" not in params:
        raise ValueError("parameter 'alpha' is required")
    return kind, params


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    problems: list[str] = []
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    methods: list[tuple[int, str, dict]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "method":
            try:
                kind, params = _parse_method(value)
            except ValueError as exc:
                problems.append(f"{source}:{lineno}: method: {exc}")
                continue
            methods.append((lineno, kind, params))
            continue
        if key not in _KEYS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"{source}:{lineno}: key {key!r} repeated (first on line {lines[key]})")
            continue
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            problems.append(f"{source}:{lineno}: {key}: {exc}")
            continue
        lines[key] = lineno

    def where(key: str) -> str:
        return f"{source}:{lines[key]}" if key in lines else source

    def check(cond: bool, key: str, msg: str):
        if not cond:
            problems.append(f"{where(key)}: {key}: {msg}")

    scen = None
    if "scenario" not in values:
        problems.append(f"{source}: scenario: required key missing (one of {', '.join(SCENARIOS)})")
    else:
        try:
            scen = ScenarioSpec(str(values["scenario"]), int(values.get("dim", 0)))
        except ValueError as exc:
            problems.append(f"{where('scenario')}: scenario: {exc}")

    cfg = RunConfig(scenario=scen, methods=[])  # type: ignore[arg-type]
    for key, val in values.items():
        if key not in ("scenario", "dim"):
            setattr(cfg, key, Path(val) if key == "output_dir" else val)

    check(cfg.T >= 1, "T", f"must be >= 1, got {cfg.T}")
    check(cfg.n_test >= 1, "n_test", f"must be >= 1, got {cfg.n_test}")
    check(cfg.n_trials >= 1, "n_trials", f"must be >= 1, got {cfg.n_trials}")
    check(cfg.seed >= 1, "seed", f"must be >= 1 (the test set uses seed - 1), got {cfg.seed}")
    if cfg.sigma is not None:
        check(cfg.sigma > 0, "sigma", f"must be positive or 'cv', got {cfg.sigma}")
    check(cfg.cv_folds >= 2, "cv_folds", f"must be >= 2, got {cfg.cv_folds}")
    check(cfg.n_warmup >= max(cfg.cv_folds, 2), "n_warmup",
          f"must be at least cv_folds={cfg.cv_folds}, got {cfg.n_warmup}")
    check(all(s > 0 for s in cfg.sigma_scales), "sigma_scales", "entries must be positive")
    if cfg.sigma_grid is not None:
        check(all(s > 0 for s in cfg.sigma_grid), "sigma_grid", "entries must be positive")
    check(all(v >= 0 for v in cfg.lambda_grid), "lambda_grid", "entries must be non-negative")
    train_fold = cfg.n_warmup - math.ceil(cfg.n_warmup / max(cfg.cv_folds, 1))
    check(1 <= cfg.cv_M <= max(train_fold, 0), "cv_M",
          f"must lie in [1, {train_fold}] (q-samples in a CV training fold), got {cfg.cv_M}")

    if "checkpoints" not in values:
        cfg.checkpoints = default_checkpoints(max(cfg.T, 1))
    else:
        cps = cfg.checkpoints
        ok = all(b > a for a, b in zip(cps, cps[1:])) and cps[0] >= 1 and cps[-1] <= cfg.T
        check(ok, "checkpoints", f"must be strictly increasing within [1, T={cfg.T}], got {list(cps)}")

    ids: dict[str, int] = {}
    for lineno, kind, params in methods:
        loc = f"{source}:{lineno}"
        alpha = params["alpha"]
        mid = str(params.get("id", kind))
        if mid in ids:
            problems.append(f"{loc}: method: id {mid!r} already used on line {ids[mid]}; add id=<name>")
            continue
        if "," in mid:
            problems.append(f"{loc}: method: id must not contain commas")
            continue
        ids[mid] = lineno
        if kind == "olre":
            if not 0.0 < alpha < 1.0:
                problems.append(f"{loc}: alpha: must lie in (0, 1), got {alpha}")
            beta = params.get("beta", 0.5)
            if not 0.5 <= beta <= 1.0:
                problems.append(f"{loc}: beta: must lie in [0.5, 1], got {beta}")
            a = params.get("a", 4.0)
            if not a >= 4.0:
                problems.append(f"{loc}: a: must be >= 4, got {a}")
            t0 = params.get("t0", 100)
            if t0 < 1:
                problems.append(f"{loc}: t0: must be >= 1, got {t0}")
            cfg.methods.append(OLREMethod(alpha, beta, a, t0, mid))
        else:
            if not 0.0 <= alpha < 1.0:
                problems.append(f"{loc}: alpha: must lie in [0, 1), got {alpha}")
            lam = params.get("lambda", None)
            if lam is not None and lam < 0:
                problems.append(f"{loc}: lambda: must be non-negative or 'cv', got {lam}")
            M = params.get("M", 50)
            if not 1 <= M <= cfg.n_warmup:
                problems.append(f"{loc}: M: must lie in [1, n_warmup={cfg.n_warmup}], got {M}")
            cfg.methods.append(RulsifMethod(alpha, lam, M, mid))
    if not methods:
        problems.append(f"{source}: method: at least one 'method = ...' line is required")

    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config: {exc.strerror}"]) from None
    return parse_config_text(text, str(path))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (tuple, list)):
        return ", ".join(_fmt(v) for v in x)
    return str(x)


def format_config(cfg: RunConfig) -> str:
    """Config text with every default spelled out; parses back to ``cfg``."""
    out = [
        f"scenario = {cfg.scenario.id}",
        f"dim = {cfg.scenario.dim}",
        f"T = {cfg.T}",
        f"n_test = {cfg.n_test}",
        f"n_trials = {cfg.n_trials}",
        f"checkpoints = {_fmt(cfg.checkpoints)}",
        f"seed = {cfg.seed}",
        f"sigma = {'cv' if cfg.sigma is None else _fmt(cfg.sigma)}",
        f"reuse_warmup_pairs = {_fmt(cfg.reuse_warmup_pairs)}",
        f"n_warmup = {cfg.n_warmup}",
        f"cv_folds = {cfg.cv_folds}",
        f"sigma_scales = {_fmt(cfg.sigma_scales)}",
    ]
    if cfg.sigma_grid is not None:
        out.append(f"sigma_grid = {_fmt(cfg.sigma_grid)}")
    out += [
        f"lambda_grid = {_fmt(cfg.lambda_grid)}",
        f"cv_M = {cfg.cv_M}",
        f"output_dir = {cfg.output_dir}",
    ]
    for m in cfg.methods:
        if isinstance(m, OLREMethod):
            out.append(f"method = olre id={m.name} alpha={m.alpha!r} beta={m.beta!r} a={m.a!r} t0={m.t0}")
        else:
            lam = "cv" if m.lam is None else repr(m.lam)
            out.append(f"method = rulsif id={m.name} alpha={m.alpha!r} lambda={lam} M={m.M}")
    return "\n".join(out) + "\n"
