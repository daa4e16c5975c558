import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from extmix.dependence import (DependenceCurve, chi_empirical, chibar_empirical, kendall_tau,
                               kendall_tau_bruteforce, pseudo_observations)
from extmix.exceptions import InsufficientTailError, UsageError

GRID = [0.5, 0.7, 0.9]


def comonotone(rng, n=2000):
    x = rng.standard_normal(n)
    return np.column_stack([x, x])


def countermonotone(rng, n=2000):
    x = rng.standard_normal(n)
    return np.column_stack([x, -x])


def naive_tau(X):
    # plain concordance count for tie-free data, independent of both library routes
    n = X.shape[0]
    s = 0
    for i in range(n):
        s += np.sum(np.sign(X[i, 0] - X[i + 1:, 0]) * np.sign(X[i, 1] - X[i + 1:, 1]))
    return s / (n * (n - 1) / 2)


class TestChi:
    def test_comonotone(self, rng):
        vals = chi_empirical(comonotone(rng), GRID).values
        assert np.allclose(vals, 1.0, atol=2e-3)

    def test_independent(self, rng):
        n = 100_000
        r = 0.9
        got = chi_empirical(rng.random((n, 2)), [r]).values[0]
        p = (1 - r) ** 2
        se = math.sqrt(p * (1 - p) / n) / (1 - r)
        assert abs(got - (1 - r)) < 3 * se

    def test_countermonotone(self, rng):
        assert chi_empirical(countermonotone(rng), [0.9]).values[0] == 0.0

    def test_matches_definition(self, rng):
        X = rng.standard_normal((500, 2))
        n = X.shape[0]
        U = np.column_stack([stats.rankdata(X[:, j]) for j in range(2)]) / (n + 1)
        for r in GRID:
            direct = np.mean((U[:, 0] > r) & (U[:, 1] > r)) / (1 - r)
            assert chi_empirical(X, [r]).values[0] == pytest.approx(direct, rel=1e-12)

    def test_insufficient_tail(self, rng):
        X = rng.standard_normal((100, 2))
        with pytest.raises(InsufficientTailError):
            chi_empirical(X, [0.995])

    def test_needs_fifty_rows(self, rng):
        with pytest.raises(UsageError):
            chi_empirical(rng.standard_normal((49, 2)), [0.5])

    def test_bad_grid(self, rng):
        with pytest.raises(UsageError):
            chi_empirical(rng.standard_normal((100, 2)), [0.7, 0.5])


class TestChiBar:
    def test_comonotone(self, rng):
        assert np.allclose(chibar_empirical(comonotone(rng), GRID).values, 1.0, atol=1e-3)

    def test_independent(self, rng):
        vals = chibar_empirical(rng.random((100_000, 2)), GRID).values
        assert np.allclose(vals, 0.0, atol=0.03)

    def test_bivariate_normal(self, rng):
        rho, r = 0.7, 0.9
        X = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=100_000)
        got = chibar_empirical(X, [r]).values[0]
        # exact oracle: joint survival of the normal copula at the r quantile
        q = stats.norm.ppf(r)
        joint = stats.multivariate_normal.cdf([-q, -q], [0, 0], [[1, rho], [rho, 1]],
                                              abseps=1e-12, releps=1e-12)
        exact = 2 * math.log(1 - r) / math.log(joint) - 1
        assert 0 < got < 1
        assert got == pytest.approx(exact, abs=0.05)

    def test_no_joint_exceedance_is_nan(self, rng):
        assert math.isnan(chibar_empirical(countermonotone(rng), [0.9]).values[0])

    def test_range(self, rng):
        X = rng.standard_normal((5_000, 2))
        X[:, 1] += 0.5 * X[:, 0]
        v = chibar_empirical(X, GRID).values
        assert np.all((v >= -1) & (v <= 1))


class TestKendall:
    def test_comonotone(self, rng):
        assert kendall_tau(comonotone(rng, 300)) == 1.0

    def test_countermonotone(self, rng):
        assert kendall_tau(countermonotone(rng, 300)) == -1.0

    def test_three_pairs(self):
        assert kendall_tau(np.array([[1, 1], [2, 3], [3, 2]])) == pytest.approx(1 / 3)

    def test_constant_column(self):
        assert math.isnan(kendall_tau(np.column_stack([np.ones(10), np.arange(10)])))

    def test_bruteforce_agreement_exact(self):
        rng = np.random.default_rng(99)
        for k in range(200):
            n = int(rng.integers(2, 501))
            if k % 2:
                X = rng.integers(0, 8, size=(n, 2)).astype(float)  # heavy ties
            else:
                X = rng.standard_normal((n, 2))
            fast, slow = kendall_tau(X), kendall_tau_bruteforce(X)
            if math.isnan(slow):
                assert math.isnan(fast)
            else:
                assert fast == slow

    def test_scipy_tau_b(self, rng):
        X = rng.integers(0, 5, size=(400, 2)).astype(float)
        assert kendall_tau(X) == pytest.approx(stats.kendalltau(X[:, 0], X[:, 1]).statistic,
                                               abs=1e-12)

    def test_naive_count_without_ties(self, rng):
        X = rng.standard_normal((300, 2))
        X[:, 1] += X[:, 0]
        assert kendall_tau(X) == pytest.approx(naive_tau(X), abs=1e-12)

    def test_population_value_for_normal(self, rng):
        X = rng.multivariate_normal([0, 0], [[1, 0.7], [0.7, 1]], size=50_000)
        assert kendall_tau(X) == pytest.approx(2 / math.pi * math.asin(0.7), abs=0.01)


class TestRankInvariance:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(0.2, 3.0))
    def test_monotone_transforms(self, seed, power):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((200, 2))
        X[:, 1] += X[:, 0]
        Y = np.column_stack([np.exp(X[:, 0]), np.sign(X[:, 1]) * np.abs(X[:, 1]) ** power])
        assert kendall_tau(X) == pytest.approx(kendall_tau(Y), abs=1e-12)
        assert np.array_equal(chi_empirical(X, GRID).values, chi_empirical(Y, GRID).values)
        assert np.array_equal(chibar_empirical(X, GRID).values, chibar_empirical(Y, GRID).values,
                              equal_nan=True)


def test_pseudo_observations_inside_unit_interval(rng):
    U = pseudo_observations(rng.standard_normal((100, 2)))
    assert U.min() == pytest.approx(1 / 101) and U.max() == pytest.approx(100 / 101)


def test_curve_validation():
    with pytest.raises(UsageError):
        DependenceCurve(np.array([0.0, 0.5]), np.zeros(2), 10)
