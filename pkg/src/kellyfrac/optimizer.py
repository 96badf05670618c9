"""Leverage selection: full, fractional and sum-constrained Kelly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    GbmParams,
    GrowthProfile,
    LeverageVector,
    MarketConfig,
    cholesky_solve,
    expected_log_growth,
    log_return_variance,
    sharpe_ratio,
)
from .errors import NumericDomainError

COLLINEAR_RTOL = 1e-6
COLLINEAR_ATOL = 1e-12


@dataclass(frozen=True)
class ConstrainedSolution:
    """Growth-optimal leverage with total leverage pinned to ``kappa_target``.

    ``lam`` is the Lagrange multiplier on the sum constraint; it behaves like
    an extra hurdle rate subtracted from every instrument's excess drift.
    """

    k: LeverageVector
    lam: float
    kappa_target: float


def full_kelly(params: GbmParams, market: MarketConfig) -> LeverageVector:
    """Growth-optimal leverage ``cov^-1 (mu - r e)``."""
    return LeverageVector(cholesky_solve(params.chol, params.excess_drift(market)))


def fractional_kelly(params: GbmParams, market: MarketConfig, alpha: float) -> LeverageVector:
    if not alpha >= 0:
        raise NumericDomainError(f"Kelly fraction must be non-negative, got {alpha}")
    return LeverageVector(alpha * full_kelly(params, market).k)


def constrained_kelly(params: GbmParams, market: MarketConfig, kappa0: float) -> ConstrainedSolution:
    """Maximize expected log-growth subject to ``sum(k) == kappa0``.

    Setting the gradient of the Lagrangian to zero gives
    ``k = cov^-1 (mu - r e - lam e)``; the constraint then fixes

        lam = (e' cov^-1 (mu - r e) - kappa0) / (e' cov^-1 e).

    With ``r = 0`` this is the textbook Lagrange-multiplier solution.
    """
    kappa0 = float(kappa0)
    if not np.isfinite(kappa0):
        raise NumericDomainError("kappa0 must be finite")
    ones = np.ones(params.m)
    kstar = cholesky_solve(params.chol, params.excess_drift(market))
    w = cholesky_solve(params.chol, ones)
    lam = (kstar.sum() - kappa0) / w.sum()
    k = kstar - lam * w
    # put the O(eps) residual on the largest entry so the sum hits kappa0
    k[np.argmax(np.abs(k))] += kappa0 - k.sum()
    return ConstrainedSolution(k=LeverageVector(k), lam=float(lam), kappa_target=kappa0)


def optimal_growth(params: GbmParams, market: MarketConfig) -> GrowthProfile:
    """Growth profile of full Kelly: ``L = r + S^2 / 2``, ``V = S^2``."""
    s = sharpe_ratio(params, market)
    return GrowthProfile(
        expected_log_growth=market.risk_free_rate + 0.5 * s * s,
        log_return_variance=s * s,
        sharpe=s,
        kelly_fraction=1.0,
    )


def kelly_fraction_estimate(
    k: LeverageVector, params: GbmParams, market: MarketConfig
) -> Optional[float]:
    """Ratio of ``k`` to full Kelly, or ``None`` when they are not collinear.

    Collinearity is judged per component with relative tolerance
    ``COLLINEAR_RTOL`` and absolute floor ``COLLINEAR_ATOL``.
    """
    if not isinstance(k, LeverageVector):
        k = LeverageVector(k)
    if k.m != params.m:
        return None
    kstar = full_kelly(params, market).k
    if np.all(np.abs(kstar) <= COLLINEAR_ATOL):
        return 0.0 if np.all(np.abs(k.k) <= COLLINEAR_ATOL) else None
    # least-squares scalar, then verify every component
    alpha = float(k.k @ kstar / (kstar @ kstar))
    if np.allclose(k.k, alpha * kstar, rtol=COLLINEAR_RTOL, atol=COLLINEAR_ATOL):
        return alpha
    return None


def growth_profile(k: LeverageVector, params: GbmParams, market: MarketConfig) -> GrowthProfile:
    """L, V, S and (when defined) the Kelly fraction of an arbitrary leverage vector."""
    return GrowthProfile(
        expected_log_growth=expected_log_growth(params, k, market),
        log_return_variance=log_return_variance(params, k),
        sharpe=sharpe_ratio(params, market),
        kelly_fraction=kelly_fraction_estimate(k, params, market),
    )
