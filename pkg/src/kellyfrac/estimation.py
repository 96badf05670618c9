"""Method-of-moments GBM estimation from daily price panels."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import GbmParams, MarketConfig, cholesky_lower
from .errors import DimensionError, InputError, NotPositiveDefiniteError, NumericDomainError

logger = logging.getLogger(__name__)

#: Eigenvalue floor used when repairing an indefinite correlation estimate.
REPAIR_EIGEN_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class InstrumentPanel:
    """Aligned adjusted closing prices.

    Parameters
    ----------
    instrument_ids : sequence of str
        One label per column.
    dates : array_like of datetime64[D]
        Strictly increasing trading dates, one per row.
    prices : array_like, shape (n, m)
        Strictly positive prices.
    """

    instrument_ids: tuple
    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.instrument_ids)
        dates = np.asarray(self.dates, dtype="datetime64[D]").reshape(-1)
        prices = np.array(self.prices, dtype=float, copy=True)
        if prices.ndim == 1:
            prices = prices[:, None]
        n, m = prices.shape
        if len(ids) != m:
            raise DimensionError(f"{len(ids)} instrument ids for {m} price columns")
        if len(set(ids)) != m:
            raise InputError(f"duplicate instrument ids: {ids}")
        if dates.size != n:
            raise DimensionError(f"{dates.size} dates for {n} price rows")
        if n < 3:
            raise InputError(f"need at least 3 dates, got {n}")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            i = int(np.argmax(np.diff(dates) <= np.timedelta64(0, "D")))
            raise InputError(f"dates not strictly increasing at {dates[i]} -> {dates[i + 1]}")
        bad = ~(np.isfinite(prices) & (prices > 0))
        if bad.any():
            t, j = np.argwhere(bad)[0]
            raise NumericDomainError(
                f"non-positive price {prices[t, j]!r} for {ids[j]} on {dates[t]}"
            )
        prices.setflags(write=False)
        dates.setflags(write=False)
        object.__setattr__(self, "instrument_ids", ids)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    @property
    def m(self) -> int:
        return self.prices.shape[1]

    def select(self, ids) -> "InstrumentPanel":
        cols = [self.instrument_ids.index(i) for i in ids]
        return InstrumentPanel(tuple(ids), self.dates, self.prices[:, cols])

    def __eq__(self, other):
        if not isinstance(other, InstrumentPanel):
            return NotImplemented
        return (
            self.instrument_ids == other.instrument_ids
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.prices, other.prices)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LogReturnMatrix:
    """Daily log-returns, one row per consecutive pair of panel dates."""

    returns: np.ndarray
    instrument_ids: tuple = ()

    def __post_init__(self):
        r = np.array(self.returns, dtype=float, copy=True)
        if r.ndim == 1:
            r = r[:, None]
        if r.ndim != 2:
            raise DimensionError(f"returns must be 2-D, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise NumericDomainError("log-returns contain non-finite values")
        ids = tuple(self.instrument_ids) or tuple(f"x{j}" for j in range(r.shape[1]))
        if len(ids) != r.shape[1]:
            raise DimensionError(f"{len(ids)} ids for {r.shape[1]} return columns")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "instrument_ids", ids)

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]


def daily_log_returns(panel: InstrumentPanel) -> LogReturnMatrix:
    """``log(P[t+1, j]) - log(P[t, j])`` for every instrument."""
    logp = np.log(panel.prices)
    return LogReturnMatrix(np.diff(logp, axis=0), panel.instrument_ids)


def _nearest_correlation(corr: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(corr)
    w = np.maximum(w, REPAIR_EIGEN_FLOOR)
    fixed = (v * w) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    fixed = (fixed + fixed.T) / 2.0
    np.fill_diagonal(fixed, 1.0)
    return fixed


def moment_estimates(returns: LogReturnMatrix, market: MarketConfig):
    """Raw ``(mu, sigma, corr)`` arrays, before any positive-definiteness check.

    See :func:`estimate_gbm_params` for the formulas.
    """
    d = returns.returns
    n_obs, m = d.shape
    if n_obs < 3:
        raise InputError(f"need at least 3 daily returns, got {n_obs}")
    T = market.trading_days_per_year
    dof = n_obs - 1

    means = np.array([math.fsum(d[:, j]) / n_obs for j in range(m)])
    dev = d - means
    sxx = np.empty((m, m))
    for j in range(m):
        for k in range(j, m):
            sxx[j, k] = sxx[k, j] = math.fsum(dev[:, j] * dev[:, k])

    zero = np.flatnonzero(np.diag(sxx) <= 0.0)
    if zero.size:
        names = [returns.instrument_ids[j] for j in zero]
        raise NumericDomainError(f"zero sample variance (constant prices) for {names}")

    sigma2 = T * np.diag(sxx) / dof
    sigma = np.sqrt(sigma2)
    mu = T * means + sigma2 / 2.0
    root = np.sqrt(np.diag(sxx))
    corr = np.clip(sxx / np.outer(root, root), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return mu, sigma, corr


def estimate_gbm_params(
    returns: LogReturnMatrix, market: MarketConfig, repair: bool = False
) -> GbmParams:
    """Moment estimates of drift, volatility and correlation.

    With ``T`` trading days per year, ``N`` daily returns per column and
    column means ``Dbar``::

        sigma2_j = T / (N - 1) * sum_t (D[t, j] - Dbar_j)**2
        mu_j     = T * Dbar_j + sigma2_j / 2
        R_jk     = T / (sigma_j sigma_k (N - 1)) * sum_t (D[t, j] - Dbar_j)(D[t, k] - Dbar_k)

    ``N - 1`` equals ``n - 2`` for a panel of ``n`` prices. Sums are exactly
    rounded (``math.fsum``) so the result does not depend on summation order.

    Parameters
    ----------
    repair : bool
        Clip the correlation estimate's eigenvalues at ``REPAIR_EIGEN_FLOOR``
        instead of raising when it is not positive definite.
    """
    mu, sigma, corr = moment_estimates(returns, market)
    try:
        cholesky_lower(corr, "estimated correlation matrix")
    except NotPositiveDefiniteError:
        if not repair:
            raise
        logger.warning("estimated correlation matrix is not positive definite; clipping eigenvalues")
        corr = _nearest_correlation(corr)
    return GbmParams(mu=mu, sigma=sigma, corr=corr)


def apply_tax_adjustment(params: GbmParams, tax_rates) -> GbmParams:
    """Scale each drift by ``1 - tax_rate``; volatility and correlation are untouched."""
    rates = np.asarray(tax_rates, dtype=float).reshape(-1)
    if rates.size != params.m:
        raise DimensionError(f"{rates.size} tax rates for {params.m} instruments")
    if np.any(~(rates >= 0) | ~(rates < 1)):
        raise NumericDomainError(f"tax rates must lie in [0, 1), got {rates.tolist()}")
    return params.with_drift(params.mu * (1.0 - rates))


def daily_tax_drag(pre_tax: GbmParams, tax_rates, market: MarketConfig) -> np.ndarray:
    """Per-day log-drift removed from each instrument to mimic the tax haircut."""
    rates = np.asarray(tax_rates, dtype=float).reshape(-1)
    if rates.size != pre_tax.m:
        raise DimensionError(f"{rates.size} tax rates for {pre_tax.m} instruments")
    return rates * pre_tax.mu / market.trading_days_per_year
