"""
RULSIF: offline relative least-squares importance fitting.

With a fixed dictionary ``D`` of ``M`` points and ``f = K(D, .)^T theta`` the
penalized empirical Pearson risk

    theta^T H theta / 2 - theta^T h + lambda / 2 theta^T theta

with

    H = (1 - alpha) mean_{x in X} k(x) k(x)^T + alpha mean_{x' in X'} k(x') k(x')^T
    h = mean_{x' in X'} k(x'),        k(x) = K(D, x)

is minimized in closed form by ``theta = (H + lambda I)^{-1} h``.  The penalty
is on the Euclidean norm of ``theta``, not on the RKHS norm of ``f``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist

from .errors import InvalidInputError, NumericalError
from .kernel import Dictionary, KernelSpec, WeightedExpansion, as_points, evaluate_batch, gram

log = logging.getLogger(__name__)

DEFAULT_SIGMA_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_FOLDS = 5

# relative eigenvalue floor below which an unpenalized H counts as singular
_SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class RulsifModel:
    dictionary: Dictionary
    theta_hat: np.ndarray
    kernel: KernelSpec
    alpha: float
    lam: float

    @property
    def expansion(self) -> WeightedExpansion:
        return WeightedExpansion(self.dictionary, self.theta_hat)

    def predict(self, X) -> np.ndarray:
        return evaluate_batch(self.expansion, self.kernel, X)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_dictionary(X_prime, M: int, rng_seed) -> Dictionary:
    """Pick ``M`` points of ``X_prime`` uniformly at random without replacement.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``.
    """
    Xp = as_points(X_prime)
    n = Xp.shape[0]
    if M < 1 or M > n:
        raise InvalidInputError(f"dictionary size M={M} must lie in [1, {n}]")
    idx = _rng(rng_seed).permutation(n)[:M]
    return Dictionary(Xp[idx], Xp.shape[1])


def build_h_matrices(X, X_prime, D: Dictionary, spec: KernelSpec, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Empirical second-moment matrix ``H`` and mean vector ``h``."""
    if len(D) == 0:
        raise InvalidInputError("empty dictionary")
    X = as_points(X, D.dim)
    Xp = as_points(X_prime, D.dim)
    if X.shape[0] == 0 or Xp.shape[0] == 0:
        raise InvalidInputError("both sample sets must be nonempty")
    Kx = gram(spec, X, D.points)
    Kxp = gram(spec, Xp, D.points)
    H = (1.0 - alpha) * (Kx.T @ Kx) / X.shape[0] + alpha * (Kxp.T @ Kxp) / Xp.shape[0]
    H = 0.5 * (H + H.T)
    h = Kxp.mean(axis=0)
    return H, h


def solve_regularized(H: np.ndarray, h: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(H + lam I) theta = h`` by Cholesky factorization."""
    if lam < 0:
        raise InvalidInputError(f"lambda must be non-negative, got {lam}")
    A = H + lam * np.eye(H.shape[0])
    if lam == 0.0:
        ev = np.linalg.eigvalsh(H)
        if ev[0] <= _SINGULAR_RTOL * max(ev[-1], 0.0):
            raise NumericalError(
                f"H is numerically singular (eigenvalues in [{ev[0]:.3g}, {ev[-1]:.3g}]); use lambda > 0"
            )
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization of H + {lam} I failed: {exc}") from exc
    return linalg.cho_solve(factor, h)


def fit(X, X_prime, D: Dictionary, spec: KernelSpec, alpha: float, lam: float) -> RulsifModel:
    """Closed-form RULSIF fit on the given samples and dictionary."""
    if not 0.0 <= alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")
    H, h = build_h_matrices(X, X_prime, D, spec, alpha)
    theta = solve_regularized(H, h, lam)
    return RulsifModel(D, theta, spec, alpha, float(lam))


def penalized_objective(theta: np.ndarray, H: np.ndarray, h: np.ndarray, lam: float) -> float:
    return float(theta @ H @ theta / 2.0 - theta @ h + lam / 2.0 * theta @ theta)


def pe_score(f: WeightedExpansion, spec: KernelSpec, X_val, X_prime_val, alpha: float) -> float:
    """Held-out Pearson risk; lower is better.

    ``(1 - alpha)/2 mean_X f^2 + alpha/2 mean_X' f^2 - mean_X' f``
    """
    X = np.asarray(X_val, dtype=float)
    Xp = np.asarray(X_prime_val, dtype=float)
    if X.size == 0 or Xp.size == 0:
        raise InvalidInputError("validation sets must be nonempty")
    fx = evaluate_batch(f, spec, X)
    fxp = evaluate_batch(f, spec, Xp)
    return float((1.0 - alpha) / 2.0 * np.mean(fx**2) + alpha / 2.0 * np.mean(fxp**2) - np.mean(fxp))


def median_distance(*samples) -> float:
    """Median pairwise Euclidean distance of the pooled samples."""
    pooled = np.vstack([as_points(s) for s in samples])
    d = pdist(pooled)
    d = d[d > 0]
    if d.size == 0:
        raise InvalidInputError("need at least two distinct points for a median distance")
    return float(np.median(d))


def default_sigma_grid(X, X_prime, scales=DEFAULT_SIGMA_SCALES) -> list[float]:
    med = median_distance(X, X_prime)
    return [med * s for s in scales]


@dataclass(frozen=True)
class CVPlan:
    sigma_grid: tuple[float, ...]
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    folds: int = DEFAULT_FOLDS
    selection_rule: str = "min_mean_score"

    def __post_init__(self):
        object.__setattr__(self, "sigma_grid", tuple(float(s) for s in self.sigma_grid))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if not self.sigma_grid or not self.lambda_grid:
            raise InvalidInputError("CV grids must be nonempty")
        if any(not (s > 0 and math.isfinite(s)) for s in self.sigma_grid):
            raise InvalidInputError(f"sigma grid must be positive, got {self.sigma_grid}")
        if any(not (v >= 0 and math.isfinite(v)) for v in self.lambda_grid):
            raise InvalidInputError(f"lambda grid must be non-negative, got {self.lambda_grid}")
        if self.folds < 2:
            raise InvalidInputError(f"need at least 2 folds, got {self.folds}")
        if self.selection_rule != "min_mean_score":
            raise InvalidInputError(f"unknown selection rule {self.selection_rule!r}")


@dataclass(frozen=True)
class CVCell:
    sigma_index: int
    lambda_index: int
    sigma: float
    lam: float
    fold_scores: tuple[float, ...]
    failed: bool = False
    message: str = ""

    @property
    def mean_score(self) -> float:
        if self.failed:
            return math.nan
        return float(np.mean(self.fold_scores))


@dataclass
class CVResult:
    best_sigma: float
    best_lambda: float
    table: list[CVCell] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (best_sigma, best_lambda, table)
        return iter((self.best_sigma, self.best_lambda, self.table))


def fold_slices(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous, near-equal index blocks (sizes differ by at most one)."""
    return np.array_split(np.arange(n), folds)


def cross_validate(X, X_prime, plan: CVPlan, alpha: float, M: int, rng_seed=0) -> CVResult:
    """k-fold CV over the ``(sigma, lambda)`` grid.

    Both samples are split into ``plan.folds`` contiguous folds.  For fold
    ``k`` one dictionary of ``M`` points is drawn from the q-sample training
    part and shared by every grid cell.  Cells whose solve fails are marked
    and skipped.  Ties go to the first cell in (sigma index, lambda index)
    order.
    """
    X = as_points(X)
    Xp = as_points(X_prime, X.shape[1])
    k = plan.folds
    if X.shape[0] < k or Xp.shape[0] < k:
        raise InvalidInputError(f"need at least {k} samples per side for {k}-fold CV")
    fx = fold_slices(X.shape[0], k)
    fxp = fold_slices(Xp.shape[0], k)
    smallest_train = Xp.shape[0] - max(len(f) for f in fxp)
    if M > smallest_train:
        raise InvalidInputError(f"M={M} exceeds the {smallest_train} q-samples available in a training fold")

    rng = _rng(rng_seed)
    splits = []
    for i in range(k):
        tr_x = np.concatenate([fx[j] for j in range(k) if j != i])
        tr_xp = np.concatenate([fxp[j] for j in range(k) if j != i])
        D = random_dictionary(Xp[tr_xp], M, rng)
        splits.append((X[tr_x], Xp[tr_xp], X[fx[i]], Xp[fxp[i]], D))

    table: list[CVCell] = []
    for si, sigma in enumerate(plan.sigma_grid):
        spec = KernelSpec(sigma)
        moments = [build_h_matrices(xtr, xptr, D, spec, alpha) for xtr, xptr, _, _, D in splits]
        for li, lam in enumerate(plan.lambda_grid):
            scores = []
            try:
                for (H, h), (_, _, xva, xpva, D) in zip(moments, splits):
                    theta = solve_regularized(H, h, lam)
                    scores.append(pe_score(WeightedExpansion(D, theta), spec, xva, xpva, alpha))
            except NumericalError as exc:
                log.debug("CV cell sigma=%g lambda=%g failed: %s", sigma, lam, exc)
                table.append(CVCell(si, li, sigma, lam, tuple(scores), failed=True, message=str(exc)))
                continue
            table.append(CVCell(si, li, sigma, lam, tuple(scores)))

    ok = [c for c in table if not c.failed]
    if not ok:
        raise NumericalError("every cross-validation cell failed")
    best = ok[0]
    for cell in ok[1:]:
        if cell.mean_score < best.mean_score:
            best = cell
    return CVResult(best.sigma, best.lam, table)
