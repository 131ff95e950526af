"""
Gaussian kernels and finite kernel expansions.

A function in the RKHS is carried around as a :class:`WeightedExpansion`,
i.e. a dictionary of basis points ``x_m`` plus weights ``theta_m`` so that

    f(.) = sum_m theta_m K(x_m, .)

All expansion evaluations go through :func:`expansion_values`, which sums the
terms strictly left to right in dictionary order.  Scalar and batch
evaluation therefore agree bit for bit, and trajectories are reproducible
given the same inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

GAUSSIAN = "gaussian"

# rows per block when evaluating large batches (bounds the Gram block memory)
_ROW_BLOCK = 1024


@dataclass(frozen=True)
class KernelSpec:
    """Mercer kernel family and hyperparameters.

    Only the Gaussian family ``exp(-|x - y|^2 / (2 sigma^2))`` is shipped.
    Its feature map has unit norm everywhere, so ``sup_x sqrt(K(x, x)) = 1``.
    """

    bandwidth: float
    family: str = GAUSSIAN

    def __post_init__(self):
        if self.family != GAUSSIAN:
            raise InvalidInputError(f"unsupported kernel family {self.family!r}")
        bw = float(self.bandwidth)
        if not (math.isfinite(bw) and bw > 0):
            raise InvalidInputError(f"bandwidth must be a positive finite number, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)

    @property
    def sup_feature_norm(self) -> float:
        return 1.0


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a C-contiguous float array of shape ``(n, d)``.

    A 1-D input is read as a batch of scalars when ``dim == 1`` and as a
    single point otherwise.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[0] and arr.shape[1] != dim:
        raise InvalidInputError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    return np.ascontiguousarray(arr)


def as_vector(x) -> np.ndarray:
    """Coerce a single feature vector (scalars allowed) to a 1-D float array."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a single feature vector, got shape {arr.shape}")
    return arr


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value ``K(x, y)`` for two feature vectors."""
    x = as_vector(x)
    y = as_vector(y)
    if x.shape != y.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    sq = 0.0
    for a, b in zip(x.tolist(), y.tolist()):
        sq += (a - b) * (a - b)
    return math.exp(-sq / (2.0 * spec.bandwidth**2))


def squared_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Matrix of ``|x_i - y_j|^2`` built coordinate by coordinate.

    The difference is formed explicitly (no ``|x|^2 + |y|^2 - 2 x.y``
    expansion), so small bandwidths do not suffer from cancellation.
    """
    diff = X[:, None, 0] - Y[None, :, 0]
    sq = diff * diff
    for k in range(1, X.shape[1]):
        diff = X[:, None, k] - Y[None, :, k]
        sq += diff * diff
    return sq


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix ``K[i, j] = K(X[i], Y[j])``."""
    X = as_points(X)
    Y = X if Y is None else as_points(Y, X.shape[1])
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros((X.shape[0], Y.shape[0]))
    return np.exp(squared_distances(X, Y) * (-0.5 / spec.bandwidth**2))


def expansion_values(points: np.ndarray, weights: np.ndarray, bandwidth: float, X: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_m weights[m] K(points[m], x)`` at every row of ``X``.

    ``points`` and ``X`` must already be 2-D float arrays with matching
    column counts.  The sum runs left to right over ``m`` for every row
    (a running sum, not a pairwise or BLAS reduction), which is what makes
    single-point and batched calls identical.
    """
    n, M = X.shape[0], points.shape[0]
    out = np.zeros(n)
    if M == 0 or n == 0:
        return out
    scale = -0.5 / bandwidth**2
    for start in range(0, n, _ROW_BLOCK):
        block = np.ascontiguousarray(X[start:start + _ROW_BLOCK])
        K = np.exp(squared_distances(block, points) * scale)
        K *= weights
        out[start:start + block.shape[0]] = np.cumsum(K, axis=1)[:, -1]
    return out


@dataclass(frozen=True)
class Dictionary:
    """Ordered, append-only collection of basis points in ``R^d``."""

    points: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        dim = self.dim or None
        if dim is not None and dim < 1:
            raise InvalidInputError("dim must be a positive integer")
        pts = np.array(self.points, dtype=float)  # private copy
        if pts.size == 0:
            if dim is None:
                raise InvalidInputError("an empty dictionary needs an explicit dim")
            pts = pts.reshape(0, dim)
        else:
            # a flat list is a list of scalar points unless told otherwise
            pts = as_points(pts, dim or (1 if pts.ndim == 1 else None)).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", int(pts.shape[1]))

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def empty(cls, dim: int) -> "Dictionary":
        return cls(np.zeros((0, dim)), dim)


@dataclass(frozen=True)
class WeightedExpansion:
    """The function ``f(.) = K(D, .)^T theta`` with no truncation."""

    dictionary: Dictionary
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != len(self.dictionary):
            raise InvalidInputError(
                f"{w.shape[0]} weights for a dictionary of {len(self.dictionary)} points"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_arrays(cls, points, weights, dim: int | None = None) -> "WeightedExpansion":
        return cls(Dictionary(points, dim or 0), weights)

    @classmethod
    def zero(cls, dim: int) -> "WeightedExpansion":
        return cls(Dictionary.empty(dim), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.dictionary.dim

    def __len__(self) -> int:
        return len(self.dictionary)

    def rkhs_norm_sq(self, spec: KernelSpec) -> float:
        """``theta^T G theta`` with ``G`` the Gram matrix of the dictionary."""
        if len(self) == 0:
            return 0.0
        G = gram(spec, self.dictionary.points)
        return float(self.weights @ G @ self.weights)

    def __call__(self, spec: KernelSpec, X) -> np.ndarray:
        return evaluate_batch(self, spec, X)


def evaluate(f: WeightedExpansion, spec: KernelSpec, x) -> float:
    """Value of the expansion at a single point; O(M) kernel evaluations."""
    x = as_vector(x)
    if x.shape[0] != f.dim:
        raise InvalidInputError(f"dimension mismatch: expansion has dim {f.dim}, point has {x.shape[0]}")
    return float(expansion_values(f.dictionary.points, f.weights, spec.bandwidth, x.reshape(1, -1))[0])


def evaluate_batch(f: WeightedExpansion, spec: KernelSpec, X: Sequence | np.ndarray) -> np.ndarray:
    """Values of the expansion at each row of ``X``.

    Element ``i`` is bitwise equal to ``evaluate(f, spec, X[i])``.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(0)
    X = as_points(X, f.dim)
    return expansion_values(f.dictionary.points, f.weights, spec.bandwidth, X)
