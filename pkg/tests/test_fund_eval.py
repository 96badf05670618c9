import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kellyfrac import MarketConfig, NumericDomainError, fractional_profile
from kellyfrac.errors import InputError
from kellyfrac.fund_eval import (
    COLLAPSE_BOUND,
    FRACTIONAL,
    SUB_OPTIMAL,
    ReturnSummary,
    bootstrap_interval,
    reverse_engineer,
    risk_class,
    summarize_returns,
    to_log_returns,
)

MEDALLION = ReturnSummary(0.490, 0.187**2, 31)


def returns_with_moments(mean, sd, n, seed=0):
    x = np.random.default_rng(seed).standard_normal(n)
    x = (x - x.mean()) / x.std(ddof=1)
    return mean + sd * x


class TestSummarize:
    def test_medallion_like_sample(self):
        s = summarize_returns(returns_with_moments(0.490, 0.187, 31), periods_per_year=1)
        assert s.mean_log_return == pytest.approx(0.490, rel=1e-12)
        assert s.log_return_variance == pytest.approx(0.187**2, rel=1e-12)
        assert s.n_observations == 31

    def test_constant(self):
        assert summarize_returns([0.05] * 5).log_return_variance == 0.0

    def test_simple_to_log(self):
        logs = to_log_returns([0.10, -0.10])
        assert logs == pytest.approx([0.09531, -0.10536], abs=1e-5)
        assert summarize_returns(logs).mean_log_return == pytest.approx(-0.00503, abs=1e-5)

    def test_annualization(self):
        x = returns_with_moments(0.01, 0.02, 40)
        s = summarize_returns(x, periods_per_year=4)
        assert s.mean_log_return == pytest.approx(0.04, rel=1e-12)
        assert s.log_return_variance == pytest.approx(4 * 0.02**2, rel=1e-12)

    def test_too_few(self):
        with pytest.raises(InputError):
            summarize_returns([0.1])

    def test_total_loss_has_no_log(self):
        with pytest.raises(NumericDomainError):
            to_log_returns([0.1, -1.0])


class TestReverseEngineer:
    def test_medallion(self, market):
        res = reverse_engineer(MEDALLION, market)
        assert res.alpha == pytest.approx(0.069, abs=0.003)
        assert res.sharpe == pytest.approx(2.71, abs=0.05)
        assert res.sharpe == pytest.approx(2.72, abs=0.05)
        assert res.risk_class == FRACTIONAL

    def test_round_trip_exact(self, market):
        prof = fractional_profile(1.0, 0.5, market)
        assert (prof.expected_log_growth, prof.log_return_variance) == (0.375, 0.25)
        res = reverse_engineer(ReturnSummary(0.375, 0.25, 10), market)
        assert res.alpha == 0.5
        assert res.sharpe == 1.0

    @pytest.mark.parametrize("V", [1e-4, 0.04, 1.0, 7.3])
    def test_zero_excess_growth_is_double_kelly(self, V):
        r = 0.03
        res = reverse_engineer(ReturnSummary(r, V, 10), MarketConfig(risk_free_rate=r))
        assert res.alpha == 2.0
        assert res.risk_class == SUB_OPTIMAL

    def test_zero_variance(self, market):
        with pytest.raises(NumericDomainError, match="zero return variance"):
            reverse_engineer(ReturnSummary(0.1, 0.0, 10), market)

    def test_non_invertible(self, market):
        with pytest.raises(NumericDomainError, match="invertible"):
            reverse_engineer(ReturnSummary(-0.5, 0.04, 10), market)

    def test_collapse_bound(self, market):
        res = reverse_engineer(ReturnSummary(-0.01, 0.04, 10), market)
        assert res.alpha > 2
        assert res.risk_class == COLLAPSE_BOUND

    @given(
        s=st.floats(0.01, 5.0),
        alpha=st.floats(0.001, 1.999),
        r=st.floats(-0.05, 0.1),
    )
    @settings(max_examples=300, deadline=None)
    def test_round_trip_property(self, s, alpha, r):
        market = MarketConfig(risk_free_rate=r)
        prof = fractional_profile(s, alpha, market)
        res = reverse_engineer(ReturnSummary(prof.expected_log_growth, prof.log_return_variance, 2), market)
        assert res.alpha == pytest.approx(alpha, rel=1e-10)
        assert res.sharpe == pytest.approx(s, rel=1e-10)

    @given(L=st.floats(1e-3, 1.0), V=st.floats(1e-4, 1.0), dv=st.floats(1e-4, 0.5), dl=st.floats(1e-4, 0.5))
    @settings(max_examples=200, deadline=None)
    def test_monotonicity(self, L, V, dv, dl):
        # d alpha / dV = 4 L' / (2 L' + V)^2, so increasing in V needs L' > 0
        m = MarketConfig()
        a = reverse_engineer(ReturnSummary(L, V, 5), m).alpha
        assert reverse_engineer(ReturnSummary(L, V + dv, 5), m).alpha > a
        assert reverse_engineer(ReturnSummary(L + dl, V, 5), m).alpha < a

    @given(L=st.floats(-0.3, 0.3), V=st.floats(0.7, 1.0), dl=st.floats(1e-4, 0.05))
    @settings(max_examples=100, deadline=None)
    def test_decreasing_in_excess_growth(self, L, V, dl):
        m = MarketConfig()
        a = reverse_engineer(ReturnSummary(L, V, 5), m).alpha
        assert reverse_engineer(ReturnSummary(L + dl, V, 5), m).alpha < a


class TestRiskClass:
    @pytest.mark.parametrize(
        "alpha, expected",
        [
            (1.0 - 1e-9, FRACTIONAL),
            (1.0, FRACTIONAL),
            (1.0 + 1e-9, SUB_OPTIMAL),
            (2.0 - 1e-9, SUB_OPTIMAL),
            (2.0, SUB_OPTIMAL),
            (2.0 + 1e-9, COLLAPSE_BOUND),
        ],
    )
    def test_boundaries(self, alpha, expected):
        assert risk_class(alpha) == expected


class TestBootstrap:
    def test_interval_brackets_point(self, market):
        ci = bootstrap_interval(MEDALLION, market, n_replicates=2000, seed=3)
        res = reverse_engineer(MEDALLION, market)
        assert ci.alpha_low < res.alpha < ci.alpha_high
        assert ci.sharpe_low < res.sharpe < ci.sharpe_high
        assert ci.n_failed == 0
        assert ci.level == 0.90

    def test_deterministic_and_worker_independent(self, market):
        a = bootstrap_interval(MEDALLION, market, n_replicates=1500, seed=9, workers=1)
        b = bootstrap_interval(MEDALLION, market, n_replicates=1500, seed=9, workers=4)
        assert a == b

    def test_counts_failed_replicates(self, market):
        weak = ReturnSummary(0.001, 0.04, 5)
        ci = bootstrap_interval(weak, market, n_replicates=500, seed=1)
        assert ci.n_failed > 0
        assert math.isfinite(ci.alpha_low)
