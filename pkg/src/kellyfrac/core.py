"""Domain types and closed-form growth analytics for leveraged GBM portfolios.

All rates are per annum. A portfolio is described by a leverage vector ``k``:
``k[j]`` is the fraction of current capital held in instrument ``j`` and
``1 - sum(k)`` sits in cash (or is borrowed) at the risk-free rate. With
instrument prices following a multivariate geometric Brownian motion with
drift ``mu`` and covariance ``cov``, capital is itself a GBM with

    L(k) = r + k . (mu - r e) - k' cov k / 2      (expected log-growth)
    V(k) = k' cov k                               (log-return variance)

and the fractional Kelly policy ``k = alpha * cov^-1 (mu - r e)`` collapses
both to functions of the Sharpe ratio ``S``:

    L = r + (alpha - alpha**2 / 2) * S**2,   V = alpha**2 * S**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DimensionError, NotPositiveDefiniteError, NumericDomainError

#: Covariance matrices with a 2-norm condition number above this are rejected.
MAX_CONDITION = 1e12

DEFAULT_TRADING_DAYS = 260


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def cholesky_lower(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If factorization fails (``pivot`` names the failing leading minor,
        1-based) or the condition number exceeds ``MAX_CONDITION``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericDomainError(f"{what} contains non-finite entries")
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"{what} is not positive definite (leading minor {info} failed)",
            pivot=int(info),
        )
    if info < 0:  # pragma: no cover - lapack argument error
        raise NumericDomainError(f"dpotrf rejected argument {-info}")
    cond = np.linalg.cond(a)
    if not cond <= MAX_CONDITION:
        raise NotPositiveDefiniteError(
            f"{what} is numerically singular (condition number {cond:.3g} > {MAX_CONDITION:.0e})",
            condition=float(cond),
        )
    return factor


def cholesky_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(chol chol') x = rhs`` with two triangular solves."""
    y = solve_triangular(chol, rhs, lower=True, check_finite=False)
    return solve_triangular(chol.T, y, lower=False, check_finite=False)


def covariance_from_vol_corr(sigma, corr) -> np.ndarray:
    """Return ``diag(sigma) @ corr @ diag(sigma)``.

    ``corr`` must be a valid correlation matrix: symmetric, unit diagonal,
    entries in [-1, 1] and positive definite.
    """
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    m = sigma.size
    if corr.shape != (m, m):
        raise DimensionError(f"correlation matrix has shape {corr.shape}, expected ({m}, {m})")
    if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0):
        raise NumericDomainError(f"volatilities must be strictly positive, got {sigma.tolist()}")
    if not np.array_equal(corr, corr.T):
        raise NumericDomainError("correlation matrix is not symmetric")
    if not np.all(np.diag(corr) == 1.0):
        raise NumericDomainError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0):
        raise NumericDomainError("correlation entries must lie in [-1, 1]")
    cholesky_lower(corr, "correlation matrix")
    cov = corr * np.outer(sigma, sigma)
    # outer() is symmetric in exact arithmetic but not always bitwise
    return (cov + cov.T) / 2.0


@dataclass(frozen=True)
class MarketConfig:
    """Risk-free rate (per annum, continuously compounded) and calendar."""

    risk_free_rate: float = 0.0
    trading_days_per_year: int = DEFAULT_TRADING_DAYS

    def __post_init__(self):
        if not math.isfinite(self.risk_free_rate):
            raise NumericDomainError("risk_free_rate must be finite")
        if int(self.trading_days_per_year) != self.trading_days_per_year or self.trading_days_per_year < 1:
            raise NumericDomainError(
                f"trading_days_per_year must be a positive integer, got {self.trading_days_per_year}"
            )


@dataclass(frozen=True, eq=False)
class GbmParams:
    """Drift, volatility and correlation of a multivariate GBM.

    Parameters
    ----------
    mu : array_like, shape (m,)
        Per-annum drift of each instrument.
    sigma : array_like, shape (m,)
        Per-annum volatility, strictly positive.
    corr : array_like, shape (m, m)
        Correlation matrix; must be positive definite.

    The covariance ``cov`` and its Cholesky factor are derived once at
    construction. Use :meth:`from_covariance` when starting from a
    covariance matrix.
    """

    mu: np.ndarray
    sigma: np.ndarray
    corr: np.ndarray
    cov: np.ndarray = field(init=False, repr=False)
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        corr = np.atleast_2d(np.asarray(self.corr, dtype=float))
        if mu.size != sigma.size:
            raise DimensionError(f"mu has length {mu.size} but sigma has length {sigma.size}")
        if not np.all(np.isfinite(mu)):
            raise NumericDomainError("drift vector contains non-finite entries")
        cov = covariance_from_vol_corr(sigma, corr)
        chol = cholesky_lower(cov, "covariance matrix")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "corr", _frozen(corr))
        object.__setattr__(self, "cov", _frozen(cov))
        object.__setattr__(self, "chol", _frozen(chol))

    @classmethod
    def from_covariance(cls, mu, cov) -> "GbmParams":
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DimensionError(f"covariance must be square, got shape {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=0.0):
            raise NumericDomainError("covariance matrix is not symmetric")
        var = np.diag(cov)
        if np.any(var <= 0):
            raise NumericDomainError("covariance diagonal must be strictly positive")
        sigma = np.sqrt(var)
        corr = cov / np.outer(sigma, sigma)
        corr = (corr + corr.T) / 2.0
        np.fill_diagonal(corr, 1.0)
        return cls(mu=mu, sigma=sigma, corr=corr)

    @property
    def m(self) -> int:
        return self.mu.size

    def marginal(self, indices) -> "GbmParams":
        """Parameters of a subset of instruments (e.g. one leg of a pair)."""
        idx = np.atleast_1d(np.asarray(indices, dtype=int))
        return GbmParams(self.mu[idx], self.sigma[idx], self.corr[np.ix_(idx, idx)])

    def with_drift(self, mu) -> "GbmParams":
        return GbmParams(mu, self.sigma, self.corr)

    def excess_drift(self, market: MarketConfig) -> np.ndarray:
        return self.mu - market.risk_free_rate

    def __eq__(self, other):
        if not isinstance(other, GbmParams):
            return NotImplemented
        return (
            np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.corr, other.corr)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LeverageVector:
    """Per-instrument capital fractions; entries may be negative or exceed 1."""

    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float).reshape(-1)
        if not np.all(np.isfinite(k)):
            raise NumericDomainError("leverage vector contains non-finite entries")
        object.__setattr__(self, "k", _frozen(k))

    @property
    def kappa(self) -> float:
        """Total leverage; ``1 - kappa`` is the cash (or debt) fraction."""
        return float(np.sum(self.k))

    @property
    def m(self) -> int:
        return self.k.size

    def __len__(self):
        return self.k.size

    def __eq__(self, other):
        if not isinstance(other, LeverageVector):
            return NotImplemented
        return np.array_equal(self.k, other.k)

    __hash__ = None


@dataclass(frozen=True)
class GrowthProfile:
    """Growth coordinates of a leveraged portfolio, all per annum.

    ``kelly_fraction`` is set only when the leverage is a scalar multiple of
    full Kelly. ``exceeds_kelly`` flags fractions above 1, which take extra
    risk for growth available at a smaller fraction.
    """

    expected_log_growth: float
    log_return_variance: float
    sharpe: float
    kelly_fraction: Optional[float] = None

    def __post_init__(self):
        if self.log_return_variance < 0:
            raise NumericDomainError("log_return_variance must be non-negative")
        if self.sharpe < 0:
            raise NumericDomainError("sharpe must be non-negative")

    @property
    def log_return_sd(self) -> float:
        return math.sqrt(self.log_return_variance)

    @property
    def exceeds_kelly(self) -> bool:
        return self.kelly_fraction is not None and self.kelly_fraction > 1.0


@dataclass(frozen=True)
class NormalSpec:
    """Normal law of a log-return over a fixed horizon."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise NumericDomainError(f"variance must be non-negative, got {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def _check_leverage(params: GbmParams, k: LeverageVector) -> np.ndarray:
    if not isinstance(k, LeverageVector):
        k = LeverageVector(k)
    if k.m != params.m:
        raise DimensionError(f"leverage vector has {k.m} entries but params describe {params.m} instruments")
    return k.k


def expected_log_growth(params: GbmParams, k: LeverageVector, market: MarketConfig) -> float:
    """Expected log-growth of capital per year under constant leverage ``k``."""
    kv = _check_leverage(params, k)
    r = market.risk_free_rate
    return float(r + kv @ (params.mu - r) - 0.5 * (kv @ params.cov @ kv))


def log_return_variance(params: GbmParams, k: LeverageVector) -> float:
    """Variance of the yearly log-return of capital, ``k' cov k``."""
    kv = _check_leverage(params, k)
    # ||chol' k||^2 stays non-negative under rounding
    z = params.chol.T @ kv
    return float(z @ z)


def sharpe_ratio(params: GbmParams, market: MarketConfig) -> float:
    """Sharpe ratio of the best mix: sqrt(excess' cov^-1 excess)."""
    excess = params.excess_drift(market)
    z = solve_triangular(params.chol, excess, lower=True, check_finite=False)
    return float(math.sqrt(z @ z))


def fractional_profile(sharpe: float, alpha: float, market: MarketConfig) -> GrowthProfile:
    """Growth profile of fractional Kelly leverage at Sharpe ratio ``sharpe``.

    ``alpha`` above 1 is allowed (it describes over-levered portfolios);
    the returned profile reports it through ``exceeds_kelly``.
    """
    if not alpha >= 0:
        raise NumericDomainError(f"Kelly fraction must be non-negative, got {alpha}")
    if not sharpe >= 0:
        raise NumericDomainError(f"Sharpe ratio must be non-negative, got {sharpe}")
    s2 = sharpe * sharpe
    return GrowthProfile(
        expected_log_growth=market.risk_free_rate + (alpha - alpha * alpha / 2.0) * s2,
        log_return_variance=alpha * alpha * s2,
        sharpe=float(sharpe),
        kelly_fraction=float(alpha),
    )


def predictive_log_return(
    params: GbmParams, k: LeverageVector, market: MarketConfig, delta: float
) -> NormalSpec:
    """Distribution of ``log(A[t + delta] / A[t])`` for horizon ``delta`` years."""
    if not delta > 0:
        raise NumericDomainError(f"horizon must be positive, got {delta}")
    return NormalSpec(
        mean=expected_log_growth(params, k, market) * delta,
        variance=log_return_variance(params, k) * delta,
    )
