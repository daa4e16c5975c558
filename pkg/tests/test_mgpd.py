import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from extmix import mgpd
from extmix.exceptions import SupportError, UsageError
from extmix.mgpd import TailParams

import _oracles


class TestStdDensity:
    def test_negative_quadrant_is_zero(self):
        assert mgpd.std_logdensity([-1.0, -1.0], [0.7, 2.0]) == -math.inf

    def test_value_at_origin(self):
        z = np.array([1e-300, 1e-300])
        assert mgpd.std_logdensity(z, [1.0, 1.0]) == pytest.approx(math.log(0.5), abs=1e-14)

    def test_matches_integral_form(self, rng):
        for _ in range(10):
            a = rng.uniform(0.3, 3.0, 2)
            z = rng.normal(0.3, 1.0, 2)
            if z.max() <= 0:
                continue
            ref = _oracles.std_density_integral_form(z, a)
            assert math.exp(mgpd.std_logdensity(z, a)) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("a", [(1.0, 1.0), (0.5, 1.2), (0.4, 2.0, 1.5)])
    def test_normalization_importance_sampling(self, a, rng):
        est, se = _oracles.is_normalization(np.array(a), 1_000_000, rng)
        assert se < 0.005
        assert est == pytest.approx(1.0, abs=0.01)


class TestExpMaxU:
    def test_unit_rates(self):
        assert mgpd.exp_max_u([1.0, 1.0]) == pytest.approx(2 / 3, abs=1e-15)

    def test_one_two(self):
        assert mgpd.exp_max_u([1.0, 2.0]) == pytest.approx(0.6, abs=1e-15)

    def test_large_a_limit(self):
        assert mgpd.exp_max_u([1e12, 1e12]) < 1e-11

    def test_scenario_rates(self):
        assert mgpd.exp_max_u([0.5, 1.2]) == pytest.approx((2 + 1 / 1.2) / (3 + 1 / 1.2), abs=1e-15)
        assert mgpd.exp_max_u([0.5, 1.2]) == pytest.approx(0.73913, abs=1e-5)

    @pytest.mark.parametrize("a", [(1.0, 2.0), (0.5, 1.2)])
    def test_monte_carlo(self, a, rng):
        a = np.array(a)
        U = -rng.standard_exponential((1_000_000, 2)) * a
        v = np.exp(U.max(axis=1))
        assert abs(v.mean() - mgpd.exp_max_u(a)) < 4 * v.std() / 1000

    @given(st.lists(st.floats(0.05, 20), min_size=1, max_size=5), st.integers(0, 4),
           st.floats(1.01, 3))
    def test_in_unit_interval_and_increasing_in_rates(self, a, k, f):
        a = np.array(a)
        v = mgpd.exp_max_u(a)
        assert 0 < v < 1
        b = a.copy()
        b[k % a.size] /= f
        assert mgpd.exp_max_u(b) > v


class TestTransform:
    def test_linear_branch(self):
        t = TailParams([1, 1], [2, 2], [0, 0])
        assert np.allclose(mgpd.to_std([1.0, 3.0], t), [0.5, 1.5])

    def test_log_branch(self):
        t = TailParams([1], [1], [1])
        assert mgpd.to_std([math.e - 1], t)[0] == pytest.approx(1.0, abs=1e-15)

    def test_endpoint_is_support_error(self):
        with pytest.raises(SupportError):
            mgpd.to_std([2.0], TailParams([1], [1], [-0.5]))

    @given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(-0.9, 0.9), st.floats(0, 1)),
                    min_size=1, max_size=4))
    def test_round_trip(self, comps):
        sigma = np.array([c[0] for c in comps])
        gamma = np.array([c[1] for c in comps])
        t = TailParams(np.ones(len(comps)), sigma, gamma)
        lo, hi = t.lower_endpoint, t.upper_endpoint
        lo = np.maximum(lo, -50.0)
        hi = np.minimum(hi, 50.0)
        x = lo + (hi - lo) * (0.01 + 0.98 * np.array([c[2] for c in comps]))
        assert np.allclose(mgpd.from_std(mgpd.to_std(x, t), t), x, atol=1e-10, rtol=1e-10)

    def test_round_trip_near_zero_shape(self):
        t = TailParams([1, 1], [1.3, 0.7], [3e-9, -5e-9])
        x = np.array([2.5, -0.4])
        assert np.allclose(mgpd.from_std(mgpd.to_std(x, t), t), x, atol=1e-10)


class TestObsDensity:
    def test_identity_transform(self, rng):
        t = TailParams([0.8, 1.7], [1.0, 1.0], [0.0, 0.0])
        x = rng.normal(0.5, 1.0, (20, 2))
        assert np.allclose(mgpd.obs_logdensity(x, t), mgpd.std_logdensity(x, t.a))

    def test_against_integral_form(self):
        t = TailParams([1.0, 2.0], [1.0, 1.2], [0.2, 0.3])
        ref = _oracles.obs_density_integral_form([0.5, 0.5], t.a, t.sigma, t.gamma)
        val = mgpd.obs_logdensity([0.5, 0.5], t)
        assert math.isfinite(val)
        assert math.exp(val) == pytest.approx(ref, rel=1e-8)

    def test_below_threshold_is_zero(self):
        t = TailParams([1.0, 2.0], [1.0, 1.2], [0.2, 0.3])
        assert mgpd.obs_logdensity([-0.1, -0.2], t) == -math.inf

    def test_change_of_variables(self, rng):
        t = TailParams([0.6, 1.4], [0.8, 1.5], [0.25, -0.2])
        x = np.column_stack([rng.uniform(-3.0, 6.0, 10_000), rng.uniform(-5.0, 7.4, 10_000)])
        val = mgpd.obs_logdensity(x, t)
        ok = np.isfinite(val)
        assert ok.sum() > 1000
        z = mgpd.to_std(x[ok], t)
        ref = mgpd.std_logdensity(z, t.a) - np.sum(np.log(t.gamma * x[ok] + t.sigma), axis=1)
        assert np.max(np.abs(val[ok] - ref)) <= 1e-10


class TestSimulate:
    def test_max_positive(self, rng):
        x = mgpd.simulate(TailParams([0.5, 1.2], [0.5, 1.2], [-0.1, -0.3]), 50_000, rng)
        assert np.all(x.max(axis=1) > 0)

    @pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
    def test_max_is_unit_exponential(self, q):
        rng = np.random.default_rng(7)
        z = mgpd.simulate(TailParams([1, 1], [1, 1], [0, 0]), 100_000, rng)
        p = np.mean(z.max(axis=1) > q)
        se = math.sqrt(math.exp(-q) * (1 - math.exp(-q)) / 100_000)
        assert abs(p - math.exp(-q)) < 3 * se

    @pytest.mark.parametrize("gam", [(0.3, 0.1), (0.2, -0.2), (-0.1, -0.3)])
    def test_conditional_margins_are_gpd(self, gam):
        t = TailParams([0.5, 1.2], [0.5, 1.2], gam)
        x = mgpd.simulate(t, 20_000, np.random.default_rng(11))
        for j in range(2):
            exc = x[x[:, j] > 0, j]
            p = stats.kstest(exc, stats.genpareto(gam[j], scale=t.sigma[j]).cdf).pvalue
            assert p > 0.01

    def test_histogram_matches_density(self):
        a = np.array([0.5, 1.2])
        z = mgpd.simulate_std(a, 1_000_000, np.random.default_rng(3))
        edges = np.linspace(-3, 3, 21)
        counts, _, _ = np.histogram2d(z[:, 0], z[:, 1], bins=[edges, edges])
        # cell probabilities by a 30x30 midpoint rule
        k = 30
        h = edges[1] - edges[0]
        offs = (np.arange(k) + 0.5) / k * h
        n = z.shape[0]
        worst = 0.0
        for i in range(20):
            for j in range(20):
                g1, g2 = np.meshgrid(edges[i] + offs, edges[j] + offs, indexing="ij")
                pts = np.column_stack([g1.ravel(), g2.ravel()])
                prob = np.mean(np.exp(mgpd.std_logdensity(pts, a))) * h * h
                se = math.sqrt(max(prob * (1 - prob) / n, 1e-12))
                worst = max(worst, abs(counts[i, j] / n - prob) / (se + 2e-5))
        assert worst < 4


class TestTheoreticalChi:
    def test_unit_rates(self):
        assert mgpd.theoretical_chi([1.0, 1.0]) == pytest.approx(2 / 3, abs=1e-15)

    @given(st.floats(0.05, 20), st.floats(0.05, 20))
    def test_symmetric_and_positive(self, a1, a2):
        v = mgpd.theoretical_chi([a1, a2])
        assert v == pytest.approx(mgpd.theoretical_chi([a2, a1]), abs=1e-14)
        assert 0 < v < 1

    def test_requires_two_dimensions(self):
        with pytest.raises(UsageError):
            mgpd.theoretical_chi([1.0, 1.0, 1.0])

    def test_monte_carlo_scenario_rates(self):
        a = np.array([0.5, 1.2])
        x = mgpd.simulate(TailParams(a, [1, 1], [0, 0]), 2_000_000, np.random.default_rng(5))
        assert _oracles.empirical_chi(x, 0.995) == pytest.approx(mgpd.theoretical_chi(a), abs=0.03)


def test_tail_params_validation():
    with pytest.raises(UsageError):
        TailParams([1.0, -1.0], [1, 1], [0, 0])
    with pytest.raises(UsageError):
        TailParams([1.0], [1, 1], [0, 0])
