"""
Synthetic benchmark scenarios with closed-form densities.

=========  =============================  ==========================================
id         p                              q
=========  =============================  ==========================================
ExpI       Uniform(-sqrt(3), sqrt(3))     Laplace(0, b = 1/sqrt(2))  (unit variance)
ExpII      N(0, I_2)                      N(0, [[1, 0.8], [0.8, 1]])
ExpIII     N(0, 10 I_2)                   equal mixture of N(mu_k, 5 I_2),
                                          mu in {(0,0), (0,5), (0,-5), (5,0), (-5,0)}
Identical  N(0, I_d)                      N(0, I_d)
=========  =============================  ==========================================

Sampling is built on the uniform stream of a :class:`numpy.random.Generator`
(``Generator.random``) with fixed transforms, so a stream only depends on the
bit generator and the seed:

* uniform and Laplace draws use the inverse CDF,
* standard normals use the Box-Muller transform, two per uniform pair,
* the mixture draws a component index ``floor(5 u)`` and then a normal.

Every pair consumes exactly :attr:`ScenarioSpec.uniforms_per_pair` uniforms,
in a fixed order, so ``sample_pairs(spec, rng, n)`` yields the same pairs as
``n`` successive calls to :func:`sample_pair`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, RatioUndefinedError
from .kernel import as_points
from .olre import ObservationPair

SQRT3 = math.sqrt(3.0)
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)
EXP2_CORR = 0.8
EXP3_P_VAR = 10.0
EXP3_Q_VAR = 5.0
EXP3_MEANS = np.array([[0.0, 0.0], [0.0, 5.0], [0.0, -5.0], [5.0, 0.0], [-5.0, 0.0]])

SCENARIOS = ("ExpI", "ExpII", "ExpIII", "Identical")

# smallest uniform fed to a logarithm; keeps draws finite when u == 0
_U_FLOOR = 2.0**-53


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    dim: int = 0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {self.id!r}; choose from {', '.join(SCENARIOS)}")
        fixed = 1 if self.id == "ExpI" else 2
        dim = self.dim or fixed
        if self.id != "Identical" and dim != fixed:
            raise InvalidInputError(f"{self.id} is {fixed}-dimensional, got dim={self.dim}")
        if dim < 1:
            raise InvalidInputError("dim must be positive")
        object.__setattr__(self, "dim", int(dim))

    @property
    def uniforms_per_pair(self) -> int:
        if self.id == "ExpI":
            return 2
        if self.id == "ExpIII":
            return 5
        # both sides need ceil(d/2) Box-Muller pairs
        return 4 * ((self.dim + 1) // 2)


def scenario(name: str, dim: int = 0) -> ScenarioSpec:
    return ScenarioSpec(name, dim)


# -- sampling ---------------------------------------------------------------

def _box_muller(u1: np.ndarray, u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


def _normals(U: np.ndarray, d: int) -> np.ndarray:
    """``d`` standard normals per row from ``2 ceil(d/2)`` uniforms per row."""
    cols = []
    for k in range(0, U.shape[1], 2):
        z0, z1 = _box_muller(U[:, k], U[:, k + 1])
        cols.extend([z0, z1])
    return np.column_stack(cols[:d])


def _laplace(u: np.ndarray, b: float) -> np.ndarray:
    u = np.maximum(u, _U_FLOOR)
    lower = u < 0.5
    out = np.empty_like(u)
    out[lower] = b * np.log(2.0 * u[lower])
    out[~lower] = -b * np.log(2.0 * (1.0 - u[~lower]))
    return out


def _transform(spec: ScenarioSpec, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = U.shape[0]
    if spec.id == "ExpI":
        x = (2.0 * U[:, 0] - 1.0) * SQRT3
        xp = _laplace(U[:, 1], LAPLACE_SCALE)
        return x.reshape(n, 1), xp.reshape(n, 1)
    if spec.id == "ExpII":
        x = _normals(U[:, 0:2], 2)
        z = _normals(U[:, 2:4], 2)
        # Cholesky factor of [[1, r], [r, 1]]
        r = EXP2_CORR
        xp = np.column_stack([z[:, 0], r * z[:, 0] + math.sqrt(1.0 - r * r) * z[:, 1]])
        return x, xp
    if spec.id == "ExpIII":
        x = math.sqrt(EXP3_P_VAR) * _normals(U[:, 0:2], 2)
        comp = np.minimum((U[:, 2] * 5.0).astype(int), 4)
        xp = EXP3_MEANS[comp] + math.sqrt(EXP3_Q_VAR) * _normals(U[:, 3:5], 2)
        return x, xp
    half = U.shape[1] // 2
    return _normals(U[:, :half], spec.dim), _normals(U[:, half:], spec.dim)


def sample_pairs(spec: ScenarioSpec, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` independent pairs; returns ``(X, X_prime)`` of shape ``(n, d)``."""
    if n < 0:
        raise InvalidInputError("n must be non-negative")
    U = rng.random((n, spec.uniforms_per_pair))
    X, Xp = _transform(spec, U)
    return np.ascontiguousarray(X), np.ascontiguousarray(Xp)


def sample_pair(spec: ScenarioSpec, rng: np.random.Generator) -> ObservationPair:
    """Draw one pair ``(x ~ p, x' ~ q)``."""
    X, Xp = sample_pairs(spec, rng, 1)
    return ObservationPair(X[0], Xp[0])


def to_pairs(X: np.ndarray, X_prime: np.ndarray) -> list[ObservationPair]:
    return [ObservationPair(x, xp) for x, xp in zip(X, X_prime)]


# -- densities ----------------------------------------------------------------

def _gauss_iso(X: np.ndarray, var: float, mean=None) -> np.ndarray:
    d = X.shape[1]
    Z = X if mean is None else X - mean
    sq = np.sum(Z * Z, axis=1)
    return np.exp(-sq / (2.0 * var)) / (2.0 * np.pi * var) ** (d / 2.0)


def _pdf_p(spec: ScenarioSpec, X: np.ndarray) -> np.ndarray:
    if spec.id == "ExpI":
        x = X[:, 0]
        return np.where(np.abs(x) <= SQRT3, 1.0 / (2.0 * SQRT3), 0.0)
    if spec.id == "ExpIII":
        return _gauss_iso(X, EXP3_P_VAR)
    return _gauss_iso(X, 1.0)


def _pdf_q(spec: ScenarioSpec, X: np.ndarray) -> np.ndarray:
    if spec.id == "ExpI":
        b = LAPLACE_SCALE
        return np.exp(-np.abs(X[:, 0]) / b) / (2.0 * b)
    if spec.id == "ExpII":
        r = EXP2_CORR
        det = 1.0 - r * r
        x1, x2 = X[:, 0], X[:, 1]
        quad = (x1 * x1 - 2.0 * r * x1 * x2 + x2 * x2) / det
        return np.exp(-0.5 * quad) / (2.0 * np.pi * math.sqrt(det))
    if spec.id == "ExpIII":
        total = np.zeros(X.shape[0])
        for mu in EXP3_MEANS:
            total += _gauss_iso(X, EXP3_Q_VAR, mu)
        return total / len(EXP3_MEANS)
    return _gauss_iso(X, 1.0)


def _coerce(spec: ScenarioSpec, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and (spec.dim > 1 or arr.shape[0] == 1))
    if spec.dim == 1 and arr.ndim == 1 and arr.shape[0] != 1:
        raise InvalidInputError(f"{spec.id} expects 1-D points; pass an (n, 1) array for a batch")
    if single:
        pts = np.atleast_1d(arr).reshape(1, -1)
        if pts.shape[1] != spec.dim:
            raise InvalidInputError(f"dimension mismatch: {spec.id} has dim {spec.dim}, got {pts.shape[1]}")
        return pts, True
    return as_points(arr, spec.dim), False


def density_p(spec: ScenarioSpec, x):
    """Density of p at a point (float) or at each row of an ``(n, d)`` array."""
    X, single = _coerce(spec, x)
    out = _pdf_p(spec, X)
    return float(out[0]) if single else out


def density_q(spec: ScenarioSpec, x):
    """Density of q at a point (float) or at each row of an ``(n, d)`` array."""
    X, single = _coerce(spec, x)
    out = _pdf_q(spec, X)
    return float(out[0]) if single else out


def true_ratio(spec: ScenarioSpec, alpha: float, x):
    """Relative likelihood-ratio ``q / ((1 - alpha) p + alpha q)``.

    Bounded by ``1/alpha`` for ``alpha > 0``; equals ``1/alpha`` exactly
    wherever ``p`` vanishes.
    """
    if not 0.0 <= alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")
    X, single = _coerce(spec, x)
    p = _pdf_p(spec, X)
    q = _pdf_q(spec, X)
    if alpha == 0.0:
        if np.any(p <= 0.0):
            raise RatioUndefinedError("p(x) = 0 where the unregularized ratio was requested")
        r = q / p
    else:
        # where p vanishes the ratio is q / (alpha q) = 1/alpha, even if q underflowed
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(p > 0.0, q / ((1.0 - alpha) * p + alpha * q), 1.0 / alpha)
        # rounding can push q / ((1 - alpha) p + alpha q) a hair above 1/alpha
        r = np.minimum(r, 1.0 / alpha)
    return float(r[0]) if single else r
