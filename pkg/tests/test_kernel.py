import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lre.errors import InvalidInputError
from lre.kernel import (
    Dictionary,
    KernelSpec,
    WeightedExpansion,
    evaluate,
    evaluate_batch,
    gram,
    kernel_eval,
)

# exp(-1/2) and 1 - exp(-1/2), 30-digit mpmath evaluation
EXP_MINUS_HALF = 0.606530659712633423603799534991
ONE_MINUS_EXP_MINUS_HALF = 0.393469340287366576396200465009

coords = st.floats(-5, 5, allow_nan=False)
bandwidths = st.floats(0.05, 10)


def vec(d):
    return arrays(np.float64, d, elements=coords)


class TestKernelSpec:
    def test_rejects_nonpositive_bandwidth(self):
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(InvalidInputError):
                KernelSpec(bad)

    def test_rejects_unknown_family(self):
        with pytest.raises(InvalidInputError):
            KernelSpec(1.0, family="laplacian")

    def test_feature_norm_bound_is_one(self):
        assert KernelSpec(0.3).sup_feature_norm == 1.0


class TestKernelEval:
    def test_identity(self):
        assert kernel_eval(KernelSpec(1.0), (0, 0), (0, 0)) == 1.0

    def test_unit_distance(self):
        assert kernel_eval(KernelSpec(1.0), 0.0, 1.0) == pytest.approx(EXP_MINUS_HALF, abs=1e-15)

    def test_scaled_bandwidth(self):
        assert kernel_eval(KernelSpec(2.0), (0, 0), (2, 0)) == pytest.approx(EXP_MINUS_HALF, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            kernel_eval(KernelSpec(1.0), (0, 0), (0, 0, 0))

    @given(bandwidths, vec(3), vec(3))
    def test_symmetric(self, s, x, y):
        spec = KernelSpec(s)
        assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)

    @given(bandwidths, vec(2), vec(2))
    def test_bounded(self, s, x, y):
        k = kernel_eval(KernelSpec(s), x, y)
        assert 0.0 <= k <= 1.0
        if np.array_equal(x, y):
            assert k == 1.0

    def test_strictly_below_one_off_diagonal(self):
        assert kernel_eval(KernelSpec(1.0), 0.0, 1e-3) < 1.0

    @settings(max_examples=50)
    @given(bandwidths, st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_gram_psd(self, s, n, seed):
        X = np.random.default_rng(seed).normal(size=(n, 2))
        ev = np.linalg.eigvalsh(gram(KernelSpec(s), X))
        assert ev.min() >= -1e-10

    def test_gram_matches_scalar_kernel(self):
        rng = np.random.default_rng(3)
        X, Y = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        spec = KernelSpec(0.7)
        G = gram(spec, X, Y)
        for i in range(4):
            for j in range(5):
                assert G[i, j] == pytest.approx(kernel_eval(spec, X[i], Y[j]), rel=1e-14)

    def test_small_bandwidth_no_cancellation(self):
        # far-from-origin points one bandwidth apart; the expanded form loses this
        spec = KernelSpec(1e-4)
        x, y = np.array([[1e4]]), np.array([[1e4 + 1e-4]])
        assert gram(spec, x, y)[0, 0] == pytest.approx(EXP_MINUS_HALF, rel=1e-6)


class TestEvaluate:
    def test_empty_dictionary(self):
        f = WeightedExpansion.zero(2)
        assert evaluate(f, KernelSpec(1.0), (0.3, -1.0)) == 0.0

    def test_single_point(self):
        f = WeightedExpansion.from_arrays([[0.5, 0.5]], [2.0])
        assert evaluate(f, KernelSpec(1.0), (0.5, 0.5)) == 2.0

    def test_two_points(self):
        f = WeightedExpansion.from_arrays([0.0, 1.0], [1.0, -1.0])
        assert evaluate(f, KernelSpec(1.0), 0.0) == pytest.approx(ONE_MINUS_EXP_MINUS_HALF, abs=1e-15)

    def test_dimension_mismatch(self):
        f = WeightedExpansion.from_arrays([[0.0, 1.0]], [1.0])
        with pytest.raises(InvalidInputError):
            evaluate(f, KernelSpec(1.0), (0.0, 1.0, 2.0))
        with pytest.raises(InvalidInputError):
            evaluate_batch(f, KernelSpec(1.0), np.zeros((3, 3)))

    def test_weights_length_checked(self):
        with pytest.raises(InvalidInputError):
            WeightedExpansion.from_arrays([[0.0], [1.0]], [1.0])

    def test_batch_empty(self):
        f = WeightedExpansion.from_arrays([[0.0]], [1.0])
        assert evaluate_batch(f, KernelSpec(1.0), np.zeros((0, 1))).shape == (0,)

    def test_batch_at_dictionary_point(self):
        f = WeightedExpansion.from_arrays([[0.2, -0.4]], [1.0])
        assert evaluate_batch(f, KernelSpec(0.37), [[0.2, -0.4]]).tolist() == [1.0]

    def test_batch_matches_scalar_bitwise(self):
        rng = np.random.default_rng(0)
        f = WeightedExpansion.from_arrays(rng.normal(size=(3000, 2)), rng.normal(size=3000))
        X = rng.normal(size=(2500, 2))  # spans several row blocks
        spec = KernelSpec(0.8)
        batch = evaluate_batch(f, spec, X)
        for i in (0, 1, 1023, 1024, 2047, 2499):
            assert batch[i] == evaluate(f, spec, X[i])
        three = X[:3]
        assert evaluate_batch(f, spec, three).tolist() == [evaluate(f, spec, x) for x in three]

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(1)
        pts, w = rng.normal(size=(20, 2)), rng.normal(size=20)
        spec = KernelSpec(1.3)
        x = rng.normal(size=2)
        direct = sum(w[m] * kernel_eval(spec, pts[m], x) for m in range(20))
        assert evaluate(WeightedExpansion.from_arrays(pts, w), spec, x) == pytest.approx(direct, abs=1e-13)

    @settings(max_examples=50)
    @given(st.integers(1, 30), st.integers(0, 2**32 - 1), bandwidths)
    def test_linear_in_weights(self, M, seed, s):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(M, 2))
        w1, w2 = rng.normal(size=M), rng.normal(size=M)
        X = rng.normal(size=(5, 2))
        spec = KernelSpec(s)
        f = lambda w: evaluate_batch(WeightedExpansion.from_arrays(pts, w), spec, X)
        np.testing.assert_allclose(f(w1 + w2), f(w1) + f(w2), rtol=0, atol=1e-12)


class TestDictionary:
    def test_points_are_copied_and_frozen(self):
        src = np.zeros((2, 1))
        D = Dictionary(src)
        src[0, 0] = 5.0
        assert D.points[0, 0] == 0.0
        with pytest.raises(ValueError):
            D.points[0, 0] = 1.0

    def test_flat_input_is_scalar_points(self):
        D = Dictionary([0.0, 1.0, 2.0])
        assert (len(D), D.dim) == (3, 1)

    def test_empty_needs_dim(self):
        with pytest.raises(InvalidInputError):
            Dictionary(np.zeros(0))
        assert Dictionary.empty(3).dim == 3

    def test_rkhs_norm(self):
        f = WeightedExpansion.from_arrays([0.0, 1.0], [1.0, -1.0])
        # theta^T G theta = 2 - 2 exp(-1/2)
        assert f.rkhs_norm_sq(KernelSpec(1.0)) == pytest.approx(2 * ONE_MINUS_EXP_MINUS_HALF, abs=1e-15)
