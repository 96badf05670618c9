"""Kelly growth analytics for portfolios of geometric Brownian motions."""

from .core import (
    GbmParams,
    GrowthProfile,
    LeverageVector,
    MarketConfig,
    NormalSpec,
    covariance_from_vol_corr,
    expected_log_growth,
    fractional_profile,
    log_return_variance,
    predictive_log_return,
    sharpe_ratio,
)
from .errors import (
    DimensionError,
    InputError,
    KellyError,
    NotPositiveDefiniteError,
    NumericDomainError,
    RuinError,
    StorageError,
)
from .optimizer import (
    ConstrainedSolution,
    constrained_kelly,
    fractional_kelly,
    full_kelly,
    growth_profile,
    kelly_fraction_estimate,
    optimal_growth,
)

__version__ = "0.1.0"

__all__ = [
    "ConstrainedSolution",
    "DimensionError",
    "GbmParams",
    "GrowthProfile",
    "InputError",
    "KellyError",
    "LeverageVector",
    "MarketConfig",
    "NormalSpec",
    "NotPositiveDefiniteError",
    "NumericDomainError",
    "RuinError",
    "StorageError",
    "constrained_kelly",
    "covariance_from_vol_corr",
    "expected_log_growth",
    "fractional_kelly",
    "fractional_profile",
    "full_kelly",
    "growth_profile",
    "kelly_fraction_estimate",
    "log_return_variance",
    "optimal_growth",
    "predictive_log_return",
    "sharpe_ratio",
]
