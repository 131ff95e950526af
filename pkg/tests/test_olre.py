import math

import numpy as np
import pytest

from lre.errors import InvalidInputError
from lre.kernel import KernelSpec, WeightedExpansion, evaluate, evaluate_batch
from lre.olre import (
    ObservationPair,
    OLREConfig,
    cumulative_kernel_evals,
    functional_gradient,
    init_state,
    instantaneous_loss,
    loss_gradient,
    run_stream,
    schedule,
    step,
)

# 30-digit mpmath values of the schedule at t = 1, t0 = 100, a = 4
ETA_HALF = 0.398014876083995654266109501495  # 4 / sqrt(101)
LAM_HALF = 0.0248759297552497283916318438435  # 1 / (4 sqrt(101))
ETA_ONE = 0.184436020111042995264515269895  # 4 * 101^(-2/3)
LAM_ONE = 0.0536825187024141668207738443043  # 101^(-1/3) / 4


def config(alpha=0.1, beta=0.5, a=4.0, t0=100, sigma=1.0):
    return OLREConfig(alpha, KernelSpec(sigma), beta, a, t0)


def random_pairs(n, d=1, seed=0):
    rng = np.random.default_rng(seed)
    return [ObservationPair(rng.normal(size=d), rng.normal(size=d) + 0.5) for _ in range(n)]


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"alpha": 0.0}, {"alpha": 1.0}, {"beta": 0.4}, {"beta": 1.1}, {"a": 3.9}, {"t0": 0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidInputError):
            config(**kw)

    def test_convergence_t0_bound(self):
        assert config().convergence_t0_bound() == pytest.approx(324.0)


class TestSchedule:
    def test_beta_half(self):
        eta, lam = schedule(config(beta=0.5), 1)
        assert eta == pytest.approx(ETA_HALF, abs=1e-15)
        assert lam == pytest.approx(LAM_HALF, abs=1e-15)

    def test_beta_one(self):
        eta, lam = schedule(config(beta=1.0), 1)
        assert eta == pytest.approx(ETA_ONE, abs=1e-15)
        assert lam == pytest.approx(LAM_ONE, abs=1e-15)

    def test_monotone(self):
        for beta in (0.5, 0.75, 1.0):
            cfg = config(beta=beta, t0=1)
            vals = np.array([schedule(cfg, t) for t in range(1, 2001)])
            assert np.all(vals > 0)
            assert np.all(np.diff(vals[:, 0]) < 0)
            assert np.all(np.diff(vals[:, 1]) < 0)

    def test_t_zero(self):
        with pytest.raises(InvalidInputError):
            schedule(config(), 0)


class TestStep:
    def test_first_step_closed_form(self):
        cfg = config()
        state = step(init_state(cfg), ObservationPair([0.3], [-1.2]))
        eta1, _ = schedule(cfg, 1)
        f1 = state.snapshot()
        assert f1.weights.tolist() == [0.0, eta1]
        for q in np.linspace(-3, 3, 13):
            expected = eta1 * math.exp(-((q + 1.2) ** 2) / 2.0)
            assert evaluate(f1, cfg.kernel, q) == pytest.approx(expected, abs=1e-15)

    def test_two_steps_against_scalar_reference(self):
        alpha, a, t0 = 0.1, 4.0, 100
        k = lambda u, v: math.exp(-((u - v) ** 2) / 2.0)
        eta1, lam1 = a / math.sqrt(t0 + 1), 1.0 / (a * math.sqrt(t0 + 1))
        eta2, lam2 = a / math.sqrt(t0 + 2), 1.0 / (a * math.sqrt(t0 + 2))
        # f1 = eta1 K(1, .), dictionary [0, 1]
        theta1 = [eta1 * (alpha - 1.0) * 0.0, eta1 * (1.0 - alpha * 0.0)]
        f1 = lambda u: theta1[0] * k(0.0, u) + theta1[1] * k(1.0, u)
        v, vp = f1(0.5), f1(-0.5)
        shrink = 1.0 - eta2 * lam2
        theta2 = [shrink * theta1[0], shrink * theta1[1], eta2 * (alpha - 1.0) * v, eta2 * (1.0 - alpha * vp)]

        state = init_state(config(alpha=alpha))
        step(state, ObservationPair([0.0], [1.0]))
        step(state, ObservationPair([0.5], [-0.5]))
        np.testing.assert_allclose(state.snapshot().weights, theta2, rtol=0, atol=1e-12)
        assert state.snapshot().dictionary.points.ravel().tolist() == [0.0, 1.0, 0.5, -0.5]
        assert lam1 > lam2

    def test_dimension_mismatch(self):
        state = step(init_state(config()), ObservationPair([0.0], [1.0]))
        with pytest.raises(InvalidInputError):
            step(state, ObservationPair([0.0, 0.0], [1.0, 1.0]))
        with pytest.raises(InvalidInputError):
            ObservationPair([0.0], [1.0, 2.0])

    def test_sizes_and_counter(self):
        state = init_state(config())
        for t, pair in enumerate(random_pairs(150, d=2), start=1):
            step(state, pair)
            assert state.t == t
            assert state.size == 2 * t
            assert len(state.snapshot().weights) == 2 * t
            assert state.kernel_evals == 2 * sum(2 * j for j in range(t))
        assert state.kernel_evals == cumulative_kernel_evals(150)

    def test_weight_shrink_law(self):
        cfg = config(alpha=0.3, sigma=0.7)
        state = init_state(cfg)
        pairs = random_pairs(60, d=2, seed=4)
        for pair in pairs[:-1]:
            step(state, pair)
        before = state.snapshot().weights.copy()
        step(state, pairs[-1])
        eta, lam = schedule(cfg, 60)
        after = state.snapshot().weights
        assert np.array_equal(after[:len(before)], (1.0 - eta * lam) * before)

    def test_update_equals_functional_gradient_step(self):
        cfg = config(alpha=0.25, sigma=0.6)
        state = init_state(cfg)
        pairs = random_pairs(30, d=2, seed=7)
        for pair in pairs[:-1]:
            step(state, pair)
        f = state.snapshot()
        eta, lam = schedule(cfg, 30)
        g = functional_gradient(f, cfg.kernel, pairs[-1], cfg.alpha, lam)
        step(state, pairs[-1])
        expected = np.concatenate([f.weights, [0.0, 0.0]]) - eta * g.weights
        np.testing.assert_allclose(state.snapshot().weights, expected, rtol=0, atol=1e-14)

    def test_descent_direction(self):
        rng = np.random.default_rng(11)
        spec = KernelSpec(0.8)
        for trial in range(20):
            M = int(rng.integers(1, 12))
            f = WeightedExpansion.from_arrays(rng.normal(size=(M, 2)), rng.normal(size=M))
            pair = ObservationPair(rng.normal(size=2), rng.normal(size=2))
            alpha, lam = float(rng.uniform(0.05, 0.95)), float(rng.uniform(1e-3, 0.5))
            g = functional_gradient(f, spec, pair, alpha, lam)
            assert g.rkhs_norm_sq(spec) > 0
            eps = 1e-4
            moved = WeightedExpansion(g.dictionary, np.concatenate([f.weights, [0.0, 0.0]]) - eps * g.weights)
            assert instantaneous_loss(moved, spec, pair, alpha, lam) < instantaneous_loss(f, spec, pair, alpha, lam)


class TestInstantaneousLoss:
    def test_zero(self):
        assert instantaneous_loss(WeightedExpansion.zero(1), KernelSpec(1.0), ObservationPair([0.2], [1.0]), 0.3, 0.5) == 0.0

    def test_single_atom(self):
        spec = KernelSpec(1.0)
        x, xp = 0.4, -0.7
        f = WeightedExpansion.from_arrays([xp], [1.0])
        alpha, lam = 0.2, 0.3
        k = math.exp(-((x - xp) ** 2) / 2.0)
        expected = (1 - alpha) * k * k / 2 + alpha / 2 - 1 + lam / 2
        got = instantaneous_loss(f, spec, ObservationPair([x], [xp]), alpha, lam)
        assert got == pytest.approx(expected, abs=1e-15)

    def test_nondecreasing_in_lambda(self):
        rng = np.random.default_rng(2)
        f = WeightedExpansion.from_arrays(rng.normal(size=(5, 2)), rng.normal(size=5))
        pair = ObservationPair(rng.normal(size=2), rng.normal(size=2))
        losses = [instantaneous_loss(f, KernelSpec(1.0), pair, 0.4, lam) for lam in np.linspace(0, 2, 9)]
        assert all(b >= a for a, b in zip(losses, losses[1:]))


def finite_difference_gradient(f, spec, pair, alpha, lam, h=1e-5):
    grad = np.zeros(len(f))
    for m in range(len(f)):
        e = np.zeros(len(f))
        e[m] = h
        up = WeightedExpansion(f.dictionary, f.weights + e)
        dn = WeightedExpansion(f.dictionary, f.weights - e)
        grad[m] = (instantaneous_loss(up, spec, pair, alpha, lam) - instantaneous_loss(dn, spec, pair, alpha, lam)) / (2 * h)
    return grad


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(20):
        M = int(rng.integers(1, 15))
        spec = KernelSpec(float(rng.uniform(0.3, 2.0)))
        f = WeightedExpansion.from_arrays(rng.normal(size=(M, 2)), rng.normal(size=M))
        pair = ObservationPair(rng.normal(size=2), rng.normal(size=2))
        alpha, lam = float(rng.uniform(0.05, 0.95)), float(rng.uniform(1e-3, 0.5))
        g = loss_gradient(f, spec, pair, alpha, lam)
        fd = finite_difference_gradient(f, spec, pair, alpha, lam)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


class TestRunStream:
    def test_first_checkpoint_closed_form(self):
        cfg = config()
        pairs = random_pairs(5)
        snaps = run_stream(cfg, pairs, {1})
        eta1, _ = schedule(cfg, 1)
        assert set(snaps) == {1}
        X = np.linspace(-2, 2, 7).reshape(-1, 1)
        expected = [eta1 * math.exp(-((q - pairs[0].x_prime[0]) ** 2) / 2) for q in X[:, 0]]
        np.testing.assert_allclose(evaluate_batch(snaps[1], cfg.kernel, X), expected, rtol=0, atol=1e-15)

    def test_fold_equivalence(self):
        cfg = config(alpha=0.4, sigma=0.5)
        pairs = random_pairs(10, d=2, seed=9)
        snaps = run_stream(cfg, pairs, [10])
        state = init_state(cfg)
        for p in pairs:
            step(state, p)
        final = state.snapshot()
        assert np.array_equal(snaps[10].weights, final.weights)
        assert np.array_equal(snaps[10].dictionary.points, final.dictionary.points)

    def test_snapshots_are_independent(self):
        cfg = config()
        pairs = random_pairs(20)
        snaps = run_stream(cfg, pairs, [5, 10, 20])
        w10 = snaps[10].weights.copy()
        snaps[5] = None
        del snaps[20]
        assert np.array_equal(snaps[10].weights, w10)
        with pytest.raises(ValueError):
            snaps[10].weights[0] = 1.0
        again = run_stream(cfg, pairs, [5, 10, 20])
        assert np.array_equal(again[10].weights, w10)
        assert len(again[5]) == 10 and len(again[20]) == 40

    def test_snapshot_unaffected_by_further_steps(self):
        state = init_state(config())
        pairs = random_pairs(80)
        for p in pairs[:10]:
            step(state, p)
        snap = state.snapshot()
        w = snap.weights.copy()
        for p in pairs[10:]:  # forces buffer growth and rescaling
            step(state, p)
        assert np.array_equal(snap.weights, w)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            run_stream(config(), [], [1])
        with pytest.raises(InvalidInputError):
            run_stream(config(), random_pairs(3), [4])
        with pytest.raises(InvalidInputError):
            run_stream(config(), random_pairs(3), [0])

    def test_deterministic(self):
        pairs = random_pairs(40, d=2)
        a = run_stream(config(), pairs, [40])[40]
        b = run_stream(config(), pairs, [40])[40]
        assert np.array_equal(a.weights, b.weights)
