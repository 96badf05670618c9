import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kellyfrac import (
    GbmParams,
    LeverageVector,
    MarketConfig,
    NumericDomainError,
    constrained_kelly,
    expected_log_growth,
    fractional_kelly,
    fractional_profile,
    full_kelly,
    growth_profile,
    kelly_fraction_estimate,
    log_return_variance,
    optimal_growth,
    sharpe_ratio,
)

from conftest import random_params


def grid_constrained(mu, cov, kappa0, r=0.0, step=1e-4, half_width=10.0):
    """Brute-force 1-D search over k1 with k2 = kappa0 - k1."""
    k1 = np.arange(-half_width, half_width + step / 2, step)
    k2 = kappa0 - k1
    ex = np.asarray(mu) - r
    L = r + k1 * ex[0] + k2 * ex[1] - 0.5 * (cov[0][0] * k1**2 + 2 * cov[0][1] * k1 * k2 + cov[1][1] * k2**2)
    i = int(np.argmax(L))
    return np.array([k1[i], k2[i]])


class TestFullKelly:
    def test_reference_values(self, ref_params, market):
        k = full_kelly(ref_params, market)
        assert k.k == pytest.approx([2.89, 3.78], abs=0.05)

    def test_single_asset_with_rate(self):
        p = GbmParams([0.1], [0.2], [[1.0]])
        k = full_kelly(p, MarketConfig(risk_free_rate=0.02))
        assert k.k[0] == pytest.approx(2.0, rel=1e-14)

    def test_zero_excess(self, ref_params):
        m = MarketConfig(risk_free_rate=0.04)
        k = full_kelly(ref_params.with_drift([0.04, 0.04]), m)
        assert np.array_equal(k.k, [0.0, 0.0])

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6))
    @settings(max_examples=100, deadline=None)
    def test_first_order_condition_and_local_max(self, seed, m):
        rng = np.random.default_rng(seed)
        p = random_params(rng, m)
        market = MarketConfig(risk_free_rate=float(rng.uniform(0.0, 0.05)))
        k = full_kelly(p, market).k
        grad = p.mu - market.risk_free_rate - p.cov @ k
        assert np.max(np.abs(grad)) < 1e-9 * max(1.0, np.max(np.abs(p.mu)))
        L0 = expected_log_growth(p, LeverageVector(k), market)
        for _ in range(100):
            d = rng.standard_normal(m)
            assert L0 >= expected_log_growth(p, LeverageVector(k + 1e-3 * d), market)


class TestFractional:
    def test_reference_values(self, ref_params, market):
        k = fractional_kelly(ref_params, market, 0.30)
        assert k.k == pytest.approx([0.87, 1.13], abs=0.03)
        assert k.kappa == pytest.approx(2.0, abs=0.02)

    def test_zero(self, ref_params, market):
        assert np.array_equal(fractional_kelly(ref_params, market, 0.0).k, [0.0, 0.0])

    def test_one_is_full(self, ref_params, market):
        assert fractional_kelly(ref_params, market, 1.0) == full_kelly(ref_params, market)

    def test_negative(self, ref_params, market):
        with pytest.raises(NumericDomainError):
            fractional_kelly(ref_params, market, -0.5)

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 5), alpha=st.floats(0.0, 2.5))
    @settings(max_examples=100, deadline=None)
    def test_profile_consistency(self, seed, m, alpha):
        rng = np.random.default_rng(seed)
        p = random_params(rng, m)
        market = MarketConfig(risk_free_rate=float(rng.uniform(-0.01, 0.05)))
        prof = growth_profile(fractional_kelly(p, market, alpha), p, market)
        ref = fractional_profile(sharpe_ratio(p, market), alpha, market)
        assert prof.expected_log_growth == pytest.approx(ref.expected_log_growth, rel=1e-9, abs=1e-12)
        assert prof.log_return_variance == pytest.approx(ref.log_return_variance, rel=1e-9, abs=1e-14)
        if alpha > 1e-6:
            assert prof.kelly_fraction == pytest.approx(alpha, rel=1e-9)


class TestConstrained:
    def test_reference_values(self, ref_params, market):
        sol = constrained_kelly(ref_params, market, 2.0)
        assert sol.k.k == pytest.approx([1.33, 0.67], abs=0.02)
        assert sol.k.kappa == pytest.approx(2.0, abs=1e-9)
        assert sol.kappa_target == 2.0

    def test_unbinding_constraint(self, ref_params, market):
        kstar = full_kelly(ref_params, market)
        sol = constrained_kelly(ref_params, market, kstar.kappa)
        assert sol.lam == pytest.approx(0.0, abs=1e-14)
        assert sol.k.k == pytest.approx(kstar.k, rel=1e-12)

    def test_identity_case_against_grid(self):
        p = GbmParams([0.3, 0.1], [1.0, 1.0], np.eye(2))
        sol = constrained_kelly(p, MarketConfig(), 0.2)
        assert sol.lam == pytest.approx(0.1, rel=1e-12)
        assert sol.k.k == pytest.approx([0.2, 0.0], abs=1e-12)
        assert grid_constrained(p.mu, p.cov, 0.2) == pytest.approx(sol.k.k, abs=1e-4)

    def test_nonzero_rate_uses_excess_drift(self, ref_params):
        r = 0.02
        market = MarketConfig(risk_free_rate=r)
        sol = constrained_kelly(ref_params, market, 1.5)
        grid = grid_constrained(ref_params.mu, ref_params.cov, 1.5, r=r)
        assert sol.k.k == pytest.approx(grid, abs=1e-4)

    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6), kappa0=st.floats(-3.0, 6.0))
    @settings(max_examples=60, deadline=None)
    def test_dominates_random_feasible_vectors(self, seed, m, kappa0):
        rng = np.random.default_rng(seed)
        p = random_params(rng, m)
        market = MarketConfig()
        sol = constrained_kelly(p, market, kappa0)
        assert abs(sol.k.kappa - kappa0) < 1e-9
        best = expected_log_growth(p, sol.k, market)
        trial = rng.standard_normal((1000, m)) * 2.0
        trial += ((kappa0 - trial.sum(axis=1)) / m)[:, None]
        L = market.risk_free_rate + trial @ p.mu - 0.5 * np.einsum("ij,jk,ik->i", trial, p.cov, trial)
        assert np.all(L <= best + 1e-12)


class TestOptimalGrowth:
    def test_reference_values(self, ref_params, market):
        prof = optimal_growth(ref_params, market)
        assert 0.172 - 0.001 <= prof.expected_log_growth <= 0.173 + 0.001
        assert prof.kelly_fraction == 1.0

    def test_zero_excess(self, ref_params):
        m = MarketConfig(risk_free_rate=0.05)
        prof = optimal_growth(ref_params.with_drift([0.05, 0.05]), m)
        assert prof.expected_log_growth == 0.05
        assert prof.log_return_variance == 0.0

    def test_single_asset(self, market):
        prof = optimal_growth(GbmParams([0.1], [0.2], [[1.0]]), market)
        assert prof.expected_log_growth == pytest.approx(0.125, rel=1e-14)

    def test_matches_full_kelly_leverage(self, ref_params, market):
        k = full_kelly(ref_params, market)
        prof = optimal_growth(ref_params, market)
        assert expected_log_growth(ref_params, k, market) == pytest.approx(prof.expected_log_growth, rel=1e-12)
        assert log_return_variance(ref_params, k) == pytest.approx(prof.log_return_variance, rel=1e-12)


class TestKellyFractionEstimate:
    equity = GbmParams([0.079], [0.0396**0.5], [[1.0]])
    bonds = GbmParams([0.031], [0.123], [[1.0]])

    @pytest.mark.parametrize("k, expected", [(1.0, 0.502), (2.0, 1.003), (3.0, 1.505)])
    def test_equity_rows(self, market, k, expected):
        assert kelly_fraction_estimate(LeverageVector([k]), self.equity, market) == pytest.approx(expected, abs=0.005)

    @pytest.mark.parametrize("k, expected", [(1.0, 0.488), (2.0, 0.976)])
    def test_bond_rows(self, market, k, expected):
        assert kelly_fraction_estimate(LeverageVector([k]), self.bonds, market) == pytest.approx(expected, abs=0.005)

    def test_bond_marginal_of_printed_matrix(self, ref_params, market):
        bonds = ref_params.marginal([1])
        assert kelly_fraction_estimate(LeverageVector([1.0]), bonds, market) == pytest.approx(0.488, abs=0.005)

    def test_not_collinear(self, ref_params, market):
        assert kelly_fraction_estimate(LeverageVector([1.33, 0.67]), ref_params, market) is None

    def test_fractional_recovered(self, ref_params, market):
        k = fractional_kelly(ref_params, market, 0.3)
        assert kelly_fraction_estimate(k, ref_params, market) == pytest.approx(0.3, rel=1e-12)

    def test_relative_tolerance(self, ref_params, market):
        k = full_kelly(ref_params, market).k
        assert kelly_fraction_estimate(LeverageVector(k * (1 + np.array([0, 1e-7]))), ref_params, market) is not None
        assert kelly_fraction_estimate(LeverageVector(k * (1 + np.array([0, 1e-4]))), ref_params, market) is None
