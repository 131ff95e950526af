"""
Error metrics, single-trial execution and aggregation across trials.

The error of an estimate ``f`` is the squared distance to the true ratio in
``L2(p^alpha)``, with ``p^alpha = (1 - alpha) p + alpha q``.  Using a held-out
set of pairs it is estimated as

    (1 - alpha) mean_i (f(x_i) - r(x_i))^2 + alpha mean_i (f(x'_i) - r(x'_i))^2

where ``r`` is the closed-form relative ratio of the scenario.

Random streams
--------------
A trial with seed ``s`` splits ``SeedSequence(s)`` into three children, used
for the observation stream, the cross-validation folds and the RULSIF
dictionary, respectively.  The warm-up pairs come first in the stream.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import rulsif
from .errors import InvalidInputError, NumericalError
from .kernel import KernelSpec, WeightedExpansion, evaluate_batch
from .olre import OLREConfig, ObservationPair, run_stream
from .synthetic import ScenarioSpec, sample_pairs, to_pairs, true_ratio

DEFAULT_CHECKPOINTS = (25, 50, 100, 200, 400, 800, 1600, 2000)
DEFAULT_T = 2000
DEFAULT_N_TEST = 10_000
DEFAULT_N_TRIALS = 20

Estimate = Union[WeightedExpansion, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class TestSet:
    """Held-out pairs, stored column-wise as two ``(n, d)`` arrays."""

    __test__ = False  # not a pytest class

    X: np.ndarray
    X_prime: np.ndarray

    def __post_init__(self):
        if self.X.shape != self.X_prime.shape or self.X.ndim != 2:
            raise InvalidInputError("test set arrays must share one (n, d) shape")

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def pairs(self) -> list[ObservationPair]:
        return to_pairs(self.X, self.X_prime)

    @classmethod
    def from_pairs(cls, pairs: Sequence[ObservationPair]) -> "TestSet":
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("empty test set")
        return cls(np.stack([p.x for p in pairs]), np.stack([p.x_prime for p in pairs]))


def make_test_set(spec: ScenarioSpec, n_test: int, seed: int) -> TestSet:
    X, Xp = sample_pairs(spec, np.random.default_rng(seed), n_test)
    return TestSet(X, Xp)


def _values(f: Estimate, kernel: KernelSpec | None, X: np.ndarray) -> np.ndarray:
    if isinstance(f, WeightedExpansion):
        if kernel is None:
            raise InvalidInputError("a kernel is needed to evaluate an expansion")
        if len(f) == 0:
            return np.zeros(X.shape[0])
        return evaluate_batch(f, kernel, X)
    return np.asarray(f(X), dtype=float).reshape(-1)


def l2_error(f: Estimate, spec: KernelSpec | None, scenario: ScenarioSpec, alpha: float, test: TestSet) -> float:
    """Monte-Carlo estimate of ``E_{p^alpha}[(f - r^alpha)^2]``.

    ``f`` is an expansion (evaluated with ``spec``) or any callable mapping
    an ``(n, d)`` array to ``n`` values.
    """
    if test.size == 0:
        raise InvalidInputError("empty test set")
    rx = true_ratio(scenario, alpha, test.X)
    rxp = true_ratio(scenario, alpha, test.X_prime)
    ex = _values(f, spec, test.X) - rx
    exp_ = _values(f, spec, test.X_prime) - rxp
    return float((1.0 - alpha) * np.mean(ex * ex) + alpha * np.mean(exp_ * exp_))


def estimate_pe_divergence(f: Estimate, spec: KernelSpec | None, test: TestSet, alpha: float) -> float:
    """Plug-in value of the variational lower bound on ``PE(P^alpha || Q)``.

    ``mean_q f - (1 - alpha)/2 mean_p f^2 - alpha/2 mean_q f^2 - 1/2``; it is
    maximized by the true relative ratio.
    """
    if test.size == 0:
        raise InvalidInputError("empty test set")
    fx = _values(f, spec, test.X)
    fxp = _values(f, spec, test.X_prime)
    return float(np.mean(fxp) - (1.0 - alpha) / 2.0 * np.mean(fx * fx) - alpha / 2.0 * np.mean(fxp * fxp) - 0.5)


# -- methods and protocol ------------------------------------------------------

@dataclass(frozen=True)
class OLREMethod:
    alpha: float
    beta: float = 0.5
    a: float = 4.0
    t0: int = 100
    name: str = "olre"

    kind = "olre"


@dataclass(frozen=True)
class RulsifMethod:
    alpha: float
    lam: float | None = None  # None selects lambda by cross-validation
    M: int = 50
    name: str = "rulsif"

    kind = "rulsif"


Method = Union[OLREMethod, RulsifMethod]


@dataclass(frozen=True)
class Protocol:
    """How a trial picks its kernel and uses the warm-up pairs.

    ``sigma=None`` selects the bandwidth by RULSIF cross-validation on the
    first ``n_warmup`` pairs.  With ``reuse_warmup_pairs`` the warm-up pairs
    are also the first pairs of the training stream; otherwise the training
    stream starts after them.
    """

    sigma: float | None = None
    n_warmup: int = 100
    reuse_warmup_pairs: bool = False
    cv_folds: int = rulsif.DEFAULT_FOLDS
    sigma_scales: tuple[float, ...] = rulsif.DEFAULT_SIGMA_SCALES
    sigma_grid: tuple[float, ...] | None = None
    lambda_grid: tuple[float, ...] = rulsif.DEFAULT_LAMBDA_GRID
    cv_M: int = 50


@dataclass(frozen=True)
class TrialStreams:
    warm_X: np.ndarray
    warm_X_prime: np.ndarray
    X: np.ndarray
    X_prime: np.ndarray
    cv_seed: np.random.SeedSequence
    dict_seed: np.random.SeedSequence


def trial_streams(scenario: ScenarioSpec, seed: int, T: int, protocol: Protocol) -> TrialStreams:
    if seed < 0:
        raise InvalidInputError(f"seeds must be non-negative, got {seed}")
    s_stream, s_cv, s_dict = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(s_stream)
    wX, wXp = sample_pairs(scenario, rng, protocol.n_warmup)
    if protocol.reuse_warmup_pairs:
        X, Xp = sample_pairs(scenario, rng, max(T - protocol.n_warmup, 0))
        X = np.concatenate([wX, X])[:T]
        Xp = np.concatenate([wXp, Xp])[:T]
    else:
        X, Xp = sample_pairs(scenario, rng, T)
    return TrialStreams(wX, wXp, X, Xp, s_cv, s_dict)


def cv_plan(protocol: Protocol, warm_X: np.ndarray, warm_X_prime: np.ndarray,
            sigma: float | None = None, lam: float | None = None) -> rulsif.CVPlan:
    """Grid for the warm-up cross-validation, pinning whatever is already fixed."""
    if sigma is not None:
        sigmas = (sigma,)
    elif protocol.sigma_grid is not None:
        sigmas = protocol.sigma_grid
    else:
        sigmas = tuple(rulsif.default_sigma_grid(warm_X, warm_X_prime, protocol.sigma_scales))
    lams = (lam,) if lam is not None else protocol.lambda_grid
    return rulsif.CVPlan(sigmas, lams, protocol.cv_folds)


def select_hyperparameters(streams: TrialStreams, alpha: float, protocol: Protocol,
                           lam: float | None = None) -> tuple[float, float | None, rulsif.CVResult | None]:
    """Bandwidth (and RULSIF penalty, when requested) for one trial."""
    if protocol.sigma is not None and lam is not None:
        return protocol.sigma, lam, None
    plan = cv_plan(protocol, streams.warm_X, streams.warm_X_prime, protocol.sigma, lam)
    res = rulsif.cross_validate(
        streams.warm_X, streams.warm_X_prime, plan, alpha, protocol.cv_M,
        np.random.default_rng(streams.cv_seed),
    )
    return res.best_sigma, res.best_lambda, res


# -- trials ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialReport:
    scenario: str
    method: str
    config: dict
    checkpoints: tuple[int, ...]
    errors: tuple[float, ...]

    def __post_init__(self):
        cps = tuple(int(c) for c in self.checkpoints)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise InvalidInputError(f"checkpoints must be strictly increasing, got {cps}")
        if len(self.errors) != len(cps):
            raise InvalidInputError("one error per checkpoint")
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "errors", tuple(float(e) for e in self.errors))


def validate_checkpoints(checkpoints: Sequence[int], T: int) -> tuple[int, ...]:
    cps = tuple(int(c) for c in checkpoints)
    if not cps:
        raise InvalidInputError("at least one checkpoint is required")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise InvalidInputError(f"checkpoints must be strictly increasing, got {cps}")
    if cps[0] < 1 or cps[-1] > T:
        raise InvalidInputError(f"checkpoints must lie in [1, {T}], got {cps}")
    return cps


def run_trial(scenario: ScenarioSpec, method: Method, T: int, checkpoints: Sequence[int],
              test: TestSet, seed: int, protocol: Protocol | None = None) -> TrialReport:
    """One seeded trial of ``method``, scored at every checkpoint.

    OLRE streams the ``T`` pairs once and is scored on snapshots.  RULSIF is
    refitted from scratch on the first ``t`` pairs at each checkpoint ``t``,
    always with the same random dictionary of ``M`` warm-up q-points.
    """
    protocol = protocol or Protocol()
    cps = validate_checkpoints(checkpoints, T)
    streams = trial_streams(scenario, seed, T, protocol)
    echo = {"alpha": method.alpha, "seed": seed}

    if isinstance(method, OLREMethod):
        sigma = protocol.sigma
        if sigma is None:
            sigma, _, _ = select_hyperparameters(streams, method.alpha, protocol)
        kernel = KernelSpec(sigma)
        config = OLREConfig(method.alpha, kernel, method.beta, method.a, method.t0)
        snaps = run_stream(config, to_pairs(streams.X, streams.X_prime), cps)
        errors = [l2_error(snaps[t], kernel, scenario, method.alpha, test) for t in cps]
        echo.update(beta=method.beta, a=method.a, t0=method.t0, sigma=sigma)
    elif isinstance(method, RulsifMethod):
        sigma, lam, _ = select_hyperparameters(streams, method.alpha, protocol, method.lam)
        kernel = KernelSpec(sigma)
        D = rulsif.random_dictionary(streams.warm_X_prime, method.M, np.random.default_rng(streams.dict_seed))
        errors = []
        for t in cps:
            model = rulsif.fit(streams.X[:t], streams.X_prime[:t], D, kernel, method.alpha, lam)
            errors.append(l2_error(model.expansion, kernel, scenario, method.alpha, test))
        echo.update(sigma=sigma, lam=lam, M=method.M)
    else:
        raise InvalidInputError(f"unknown method {method!r}")

    if not all(math.isfinite(e) for e in errors):
        raise NumericalError(f"non-finite error in {method.name} trial with seed {seed}")
    return TrialReport(scenario.id, method.name, echo, cps, tuple(errors))


# -- aggregation ------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateReport:
    scenario: str
    method: str
    alpha: float
    beta: float | None
    checkpoints: tuple[int, ...]
    mean: tuple[float, ...]
    std: tuple[float, ...]
    n_trials: int


def aggregate(reports: Sequence[TrialReport]) -> AggregateReport:
    """Per-checkpoint mean and sample (n - 1) standard deviation.

    Uses :mod:`statistics`, whose exactly rounded sums make the result
    independent of report order.  With a single trial the std is NaN.
    """
    reports = list(reports)
    if not reports:
        raise InvalidInputError("nothing to aggregate")
    first = reports[0]
    key = (first.scenario, first.method, first.checkpoints, first.config.get("alpha"), first.config.get("beta"))
    for r in reports[1:]:
        if (r.scenario, r.method, r.checkpoints, r.config.get("alpha"), r.config.get("beta")) != key:
            raise InvalidInputError("cannot aggregate reports with different scenario/method/checkpoints")
    columns = list(zip(*(r.errors for r in reports)))
    means = tuple(statistics.mean(c) for c in columns)
    if len(reports) >= 2:
        stds = tuple(statistics.stdev(c) for c in columns)
    else:
        stds = tuple(math.nan for _ in columns)
    return AggregateReport(first.scenario, first.method, first.config.get("alpha"), first.config.get("beta"),
                           first.checkpoints, means, stds, len(reports))
