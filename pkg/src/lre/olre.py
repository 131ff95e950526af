"""
Online relative likelihood-ratio estimation (OLRE).

Each incoming pair ``(x_t ~ p, x'_t ~ q)`` triggers one functional stochastic
gradient step on the regularized Pearson loss

    l_t(f) = (1 - alpha) f(x_t)^2 / 2 + alpha f(x'_t)^2 / 2 - f(x'_t)
             + lambda_t / 2 ||f||_H^2

whose gradient is ``(1 - alpha) f(x_t) K(x_t, .) + (alpha f(x'_t) - 1) K(x'_t, .)
+ lambda_t f``.  In dictionary coordinates the step shrinks every old weight by
``1 - eta_t lambda_t`` and appends the two new points with weights
``eta_t (alpha - 1) f(x_t)`` and ``eta_t (1 - alpha f(x'_t))``.  The dictionary
grows by two points per step and is never pruned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidInputError
from .kernel import (
    Dictionary,
    KernelSpec,
    WeightedExpansion,
    as_vector,
    evaluate_batch,
    expansion_values,
)

DEFAULT_T0 = 100


@dataclass(frozen=True)
class OLREConfig:
    alpha: float
    kernel: KernelSpec
    beta: float = 0.5
    a: float = 4.0
    t0: int = DEFAULT_T0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.5 <= self.beta <= 1.0:
            raise InvalidInputError(f"beta must lie in [1/2, 1], got {self.beta}")
        if not self.a >= 4.0:
            raise InvalidInputError(f"a must be >= 4, got {self.a}")
        if int(self.t0) != self.t0 or self.t0 < 1:
            raise InvalidInputError(f"t0 must be a positive integer, got {self.t0}")
        object.__setattr__(self, "t0", int(self.t0))

    def convergence_t0_bound(self) -> float:
        """Smallest warm-up offset covered by the L2 convergence guarantee.

        ``(2 + 4 C^2 a)^((2 beta + 1) / (2 beta))`` with ``C = 1`` for the
        Gaussian kernel, e.g. 324 for ``a = 4, beta = 1/2``.
        """
        C = self.kernel.sup_feature_norm
        return (2.0 + 4.0 * C**2 * self.a) ** ((2.0 * self.beta + 1.0) / (2.0 * self.beta))


@dataclass(frozen=True)
class ObservationPair:
    """One time step's draw: ``x`` from p and ``x_prime`` from q."""

    x: np.ndarray
    x_prime: np.ndarray

    def __post_init__(self):
        x = as_vector(self.x)
        xp = as_vector(self.x_prime)
        if x.shape != xp.shape:
            raise InvalidInputError(f"pair dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_prime", xp)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def schedule(config: OLREConfig, t: int) -> tuple[float, float]:
    """Step size and penalty ``(eta_t, lambda_t)`` for step ``t >= 1``."""
    if t < 1:
        raise InvalidInputError(f"schedule is defined for t >= 1, got {t}")
    base = 1.0 / (config.t0 + t)
    two_beta = 2.0 * config.beta
    eta = config.a * base ** (two_beta / (two_beta + 1.0))
    lam = (1.0 / config.a) * base ** (1.0 / (two_beta + 1.0))
    return eta, lam


@dataclass
class EstimatorState:
    """Mutable OLRE state: growing dictionary, weights and step counter.

    Owned by a single stream.  :func:`step` advances it in place; use
    :meth:`snapshot` (or :attr:`f`) to obtain an independent copy of the
    current estimate.
    """

    config: OLREConfig
    t: int = 0
    kernel_evals: int = 0
    _points: np.ndarray | None = field(default=None, repr=False)
    _weights: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    _size: int = field(default=0, repr=False)

    @property
    def size(self) -> int:
        return self._size

    @property
    def dim(self) -> int | None:
        return None if self._points is None else self._points.shape[1]

    @property
    def f(self) -> WeightedExpansion:
        return self.snapshot()

    def snapshot(self) -> WeightedExpansion:
        if self._points is None:
            return WeightedExpansion.zero(1)
        n = self._size
        return WeightedExpansion(Dictionary(self._points[:n]), self._weights[:n])

    def _ensure_capacity(self, dim: int, extra: int):
        if self._points is None:
            cap = max(64, extra)
            self._points = np.zeros((cap, dim))
            self._weights = np.zeros(cap)
            return
        need = self._size + extra
        cap = self._points.shape[0]
        if need > cap:
            new_cap = max(need, 2 * cap)
            pts = np.zeros((new_cap, dim))
            pts[:self._size] = self._points[:self._size]
            w = np.zeros(new_cap)
            w[:self._size] = self._weights[:self._size]
            self._points, self._weights = pts, w

    def current_values(self, X: np.ndarray) -> np.ndarray:
        """``f_t`` at the rows of ``X`` (counted in :attr:`kernel_evals`)."""
        n = self._size
        if n == 0:
            return np.zeros(X.shape[0])
        self.kernel_evals += X.shape[0] * n
        return expansion_values(self._points[:n], self._weights[:n], self.config.kernel.bandwidth, X)


def init_state(config: OLREConfig) -> EstimatorState:
    """Zero initialization: ``f_0 = 0`` with an empty dictionary."""
    return EstimatorState(config)


def step(state: EstimatorState, pair: ObservationPair) -> EstimatorState:
    """Advance ``state`` by one observation pair (in place) and return it."""
    dim = state.dim
    if dim is not None and pair.dim != dim:
        raise InvalidInputError(f"pair has dim {pair.dim}, estimator has dim {dim}")
    cfg = state.config
    t = state.t + 1
    eta, lam = schedule(cfg, t)

    v, v_prime = state.current_values(np.stack([pair.x, pair.x_prime]))

    state._ensure_capacity(pair.dim, 2)
    n = state._size
    state._weights[:n] *= 1.0 - eta * lam
    state._points[n] = pair.x
    state._points[n + 1] = pair.x_prime
    state._weights[n] = eta * (cfg.alpha - 1.0) * v
    state._weights[n + 1] = eta * (1.0 - cfg.alpha * v_prime)
    state._size = n + 2
    state.t = t
    return state


def instantaneous_loss(f: WeightedExpansion, spec: KernelSpec, pair: ObservationPair, alpha: float, lam: float) -> float:
    """Regularized one-pair Pearson loss ``l_t(f)``."""
    v, v_prime = _values_at_pair(f, spec, pair)
    return (
        (1.0 - alpha) * v * v / 2.0
        + alpha * v_prime * v_prime / 2.0
        - v_prime
        + lam / 2.0 * f.rkhs_norm_sq(spec)
    )


def functional_gradient(f: WeightedExpansion, spec: KernelSpec, pair: ObservationPair, alpha: float, lam: float) -> WeightedExpansion:
    """Gradient of :func:`instantaneous_loss` in the RKHS, as an expansion.

    Lives on the dictionary of ``f`` extended by ``x`` and ``x'``.
    """
    v, v_prime = _values_at_pair(f, spec, pair)
    old = f.dictionary.points if len(f) else np.zeros((0, pair.dim))
    points = np.vstack([old, pair.x, pair.x_prime])
    weights = np.concatenate([lam * f.weights, [(1.0 - alpha) * v, alpha * v_prime - 1.0]])
    return WeightedExpansion(Dictionary(points), weights)


def loss_gradient(f: WeightedExpansion, spec: KernelSpec, pair: ObservationPair, alpha: float, lam: float) -> np.ndarray:
    """Gradient of :func:`instantaneous_loss` with respect to the weights of ``f``.

    By the reproducing property, ``d l / d theta_m = <grad_f l, K(x_m, .)>_H``,
    i.e. the functional gradient evaluated at the dictionary points.
    """
    g = functional_gradient(f, spec, pair, alpha, lam)
    return evaluate_batch(g, spec, f.dictionary.points)


def run_stream(config: OLREConfig, pairs: Iterable[ObservationPair], checkpoints: Iterable[int]) -> dict[int, WeightedExpansion]:
    """Run the estimator from zero over ``pairs`` and snapshot at ``checkpoints``."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidInputError("empty observation stream")
    wanted = sorted(set(int(c) for c in checkpoints))
    if wanted and (wanted[0] < 1 or wanted[-1] > len(pairs)):
        raise InvalidInputError(f"checkpoints must lie in [1, {len(pairs)}], got {wanted}")
    state = init_state(config)
    snapshots: dict[int, WeightedExpansion] = {}
    todo = set(wanted)
    for pair in pairs:
        step(state, pair)
        if state.t in todo:
            snapshots[state.t] = state.snapshot()
    return snapshots


def _values_at_pair(f: WeightedExpansion, spec: KernelSpec, pair: ObservationPair) -> tuple[float, float]:
    if len(f) == 0:
        return 0.0, 0.0
    if f.dim != pair.dim:
        raise InvalidInputError(f"pair has dim {pair.dim}, expansion has dim {f.dim}")
    v, v_prime = evaluate_batch(f, spec, np.stack([pair.x, pair.x_prime]))
    return float(v), float(v_prime)


def cumulative_kernel_evals(t: int) -> int:
    """Kernel evaluations spent by ``t`` steps from zero: ``sum_{j<t} 4 j``."""
    return 2 * t * (t - 1)
