"""Historical replay of constant-leverage policies on a price panel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import LeverageVector, MarketConfig
from .errors import DimensionError, NumericDomainError
from .estimation import InstrumentPanel, daily_log_returns
from .simulation import compound_with_ruin, rebalance_growth_factors


@dataclass(frozen=True)
class CapitalPath:
    dates: np.ndarray
    values: np.ndarray
    initial_capital: float

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise DimensionError(f"{len(self.dates)} dates for {len(self.values)} values")
        if len(self.values) and self.values[0] != self.initial_capital:
            raise NumericDomainError("first path value must equal initial_capital")


@dataclass(frozen=True)
class DrawdownRecord:
    """Largest peak-to-trough loss; ``peak_index <= trough_index``."""

    fraction: float
    peak_index: int
    trough_index: int
    peak_date: Optional[np.datetime64] = None
    trough_date: Optional[np.datetime64] = None


@dataclass(frozen=True)
class BacktestReport:
    path: CapitalPath
    annualized_log_growth: float
    annualized_log_sd: float
    max_drawdown: DrawdownRecord
    ruined: bool = False
    ruin_date: Optional[np.datetime64] = None

    @property
    def final_value(self) -> float:
        return float(self.path.values[-1])


def max_drawdown(path) -> DrawdownRecord:
    """Maximum of ``1 - A[t] / max(A[:t+1])`` in one left-to-right pass.

    Ties go to the earliest peak, then the earliest trough. ``path`` may be a
    :class:`CapitalPath` or a plain sequence of non-negative values.
    """
    if isinstance(path, CapitalPath):
        values, dates = np.asarray(path.values, dtype=float), path.dates
    else:
        values, dates = np.asarray(path, dtype=float), None
    if values.size == 0:
        raise NumericDomainError("cannot compute the drawdown of an empty path")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise NumericDomainError("path values must be finite and non-negative")

    peak_i = 0
    best_ratio, best = 1.0, (0, 0)
    for t in range(values.size):
        v = values[t]
        if v > values[peak_i]:
            peak_i = t
            continue
        if values[peak_i] > 0:
            ratio = v / values[peak_i]
            if ratio < best_ratio:
                best_ratio, best = ratio, (peak_i, t)
    if best_ratio == 0.0:
        # every earlier positive value is an equally deep peak
        best = (int(np.flatnonzero(values > 0)[0]), best[1])
    p, q = best
    return DrawdownRecord(
        fraction=1.0 - best_ratio,
        peak_index=p,
        trough_index=q,
        peak_date=None if dates is None else dates[p],
        trough_date=None if dates is None else dates[q],
    )


def annualized_log_stats(values: np.ndarray, periods_per_year: int) -> tuple[float, float]:
    """``(T * mean, sqrt(T * var))`` of per-period log capital changes (divisor N - 1)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise NumericDomainError("need at least two path values")
    if np.any(values <= 0):
        return -math.inf, math.nan
    steps = np.diff(np.log(values))
    mean = math.fsum(steps) / steps.size
    if steps.size < 2:
        return periods_per_year * mean, math.nan
    var = math.fsum((steps - mean) ** 2) / (steps.size - 1)
    return periods_per_year * mean, math.sqrt(periods_per_year * var)


def run_backtest(
    panel: InstrumentPanel,
    k: LeverageVector,
    market: MarketConfig,
    daily_drift_adjust=None,
    initial_capital: float = 1.0,
) -> BacktestReport:
    """Replay ``k`` on ``panel`` with daily rebalancing.

    Each day the instrument log-return is reduced by ``daily_drift_adjust``
    (e.g. a per-day tax drag), converted to a simple return, and capital
    moves by ``1 + (1 - kappa)(exp(r / T) - 1) + k . R``. A day that takes
    capital to zero or below ruins the path: it stays at zero afterwards.
    """
    if not isinstance(k, LeverageVector):
        k = LeverageVector(k)
    if k.m != panel.m:
        raise DimensionError(f"leverage has {k.m} entries but the panel has {panel.m} instruments")
    if not initial_capital > 0 or not math.isfinite(initial_capital):
        raise NumericDomainError(f"initial_capital must be positive, got {initial_capital}")
    T = market.trading_days_per_year
    d = daily_log_returns(panel).returns
    if daily_drift_adjust is not None:
        adj = np.asarray(daily_drift_adjust, dtype=float).reshape(-1)
        if adj.size != panel.m:
            raise DimensionError(f"{adj.size} drift adjustments for {panel.m} instruments")
        d = d - adj
    cash = math.expm1(market.risk_free_rate / T)
    factors = rebalance_growth_factors(np.expm1(d), k.k, cash)
    values, ruin_step = compound_with_ruin(factors, float(initial_capital))

    path = CapitalPath(dates=panel.dates, values=values, initial_capital=float(initial_capital))
    growth, sd = annualized_log_stats(values, T)
    return BacktestReport(
        path=path,
        annualized_log_growth=growth,
        annualized_log_sd=sd,
        max_drawdown=max_drawdown(path),
        ruined=ruin_step >= 0,
        ruin_date=panel.dates[ruin_step] if ruin_step >= 0 else None,
    )
