"""Recover a fund's Sharpe ratio and Kelly fraction from its return history.

If a fund runs fractional Kelly at fraction ``alpha`` on a portfolio with
Sharpe ratio ``S``, its annual log-returns have mean ``L = r + (alpha -
alpha^2/2) S^2`` and variance ``V = alpha^2 S^2``. Solving for the two
unknowns with ``L' = L - r``::

    alpha = 2 V / (2 L' + V)
    S^2   = (L' + V / 2) / alpha
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import MarketConfig
from .errors import InputError, NumericDomainError
from .rng import map_units, master_key, substream

FRACTIONAL = "fractional"
SUB_OPTIMAL = "sub-optimal"
COLLAPSE_BOUND = "collapse-bound"


@dataclass(frozen=True)
class ReturnSummary:
    """Annualized mean and variance of per-period log-returns."""

    mean_log_return: float
    log_return_variance: float
    n_observations: int
    periods_per_year: float = 1.0

    def __post_init__(self):
        if not self.log_return_variance >= 0:
            raise NumericDomainError("log_return_variance must be non-negative")
        if self.n_observations < 2:
            raise InputError("need at least 2 observations")


@dataclass(frozen=True)
class BootstrapInterval:
    alpha_low: float
    alpha_high: float
    sharpe_low: float
    sharpe_high: float
    level: float
    n_replicates: int
    n_failed: int


@dataclass(frozen=True)
class FundEvalResult:
    alpha: float
    sharpe: float
    risk_class: str
    interval: Optional[BootstrapInterval] = None


def risk_class(alpha: float) -> str:
    """``fractional`` up to 1, ``sub-optimal`` up to 2, ``collapse-bound`` beyond."""
    if alpha <= 1.0:
        return FRACTIONAL
    if alpha <= 2.0:
        return SUB_OPTIMAL
    return COLLAPSE_BOUND


def to_log_returns(simple_returns) -> np.ndarray:
    r = np.asarray(simple_returns, dtype=float)
    if np.any(r <= -1.0):
        raise NumericDomainError("a simple return of -100% or worse has no log-return")
    return np.log1p(r)


def summarize_returns(log_returns, periods_per_year: float = 1.0) -> ReturnSummary:
    x = np.asarray(log_returns, dtype=float).reshape(-1)
    if x.size < 2:
        raise InputError(f"need at least 2 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("returns contain non-finite values")
    if not periods_per_year > 0:
        raise InputError("periods_per_year must be positive")
    mean = math.fsum(x) / x.size
    var = math.fsum((x - mean) ** 2) / (x.size - 1)
    return ReturnSummary(periods_per_year * mean, periods_per_year * var, int(x.size), float(periods_per_year))


def _invert(L: float, V: float, r: float) -> tuple[float, float]:
    if not V > 0:
        raise NumericDomainError("zero return variance: the Kelly fraction is undefined")
    excess = L - r
    denom = 2.0 * excess + V
    if not denom > 0:
        raise NumericDomainError(
            f"2(L - r) + V = {denom:.6g} <= 0: returns are outside the invertible fractional-Kelly range"
        )
    alpha = 2.0 * V / denom
    return alpha, math.sqrt((excess + V / 2.0) / alpha)


def reverse_engineer(summary: ReturnSummary, market: MarketConfig) -> FundEvalResult:
    alpha, s = _invert(summary.mean_log_return, summary.log_return_variance, market.risk_free_rate)
    return FundEvalResult(alpha=alpha, sharpe=s, risk_class=risk_class(alpha))


def bootstrap_interval(
    summary: ReturnSummary,
    market: MarketConfig,
    n_replicates: int = 10_000,
    seed: int = 0,
    level: float = 0.90,
    workers: int = 1,
) -> BootstrapInterval:
    """Parametric bootstrap of ``(alpha, S)``.

    Each replicate draws ``n_observations`` per-period log-returns from the
    fitted normal law, re-summarizes and re-inverts. Replicates that land
    outside the invertible range are counted in ``n_failed`` and dropped.
    """
    if n_replicates < 1:
        raise InputError("n_replicates must be positive")
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    ppy = summary.periods_per_year
    mean = summary.mean_log_return / ppy
    sd = math.sqrt(summary.log_return_variance / ppy)
    n = summary.n_observations
    r = market.risk_free_rate
    key = master_key(seed)

    def block(a, b):
        out = []
        for i in range(a, b):
            x = mean + sd * substream(seed, i, key).standard_normal(n)
            m = math.fsum(x) / n
            v = math.fsum((x - m) ** 2) / (n - 1)
            try:
                out.append(_invert(ppy * m, ppy * v, r))
            except NumericDomainError:
                out.append((math.nan, math.nan))
        return out

    draws = np.array(map_units(block, n_replicates, workers))
    ok = np.isfinite(draws[:, 0])
    if not ok.any():
        raise NumericDomainError("no bootstrap replicate was invertible")
    tail = (1.0 - level) / 2.0
    a_lo, a_hi = np.quantile(draws[ok, 0], [tail, 1.0 - tail])
    s_lo, s_hi = np.quantile(draws[ok, 1], [tail, 1.0 - tail])
    return BootstrapInterval(
        alpha_low=float(a_lo),
        alpha_high=float(a_hi),
        sharpe_low=float(s_lo),
        sharpe_high=float(s_hi),
        level=level,
        n_replicates=int(n_replicates),
        n_failed=int((~ok).sum()),
    )
