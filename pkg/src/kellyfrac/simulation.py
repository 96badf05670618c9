"""Seeded Monte Carlo for correlated GBM prices and leveraged capital.

Log-price increments are drawn exactly from their Gaussian law, so the
price paths carry no discretization bias. Capital comes in two flavours:

* ``"exact"``: log-capital increments drawn from the scalar GBM that a
  constant-leverage portfolio follows in continuous time.
* ``"rebalanced"``: the simulated prices are replayed with daily (or
  per-step) rebalancing back to ``k``; this can go bust when leverage is
  high, in which case the path is frozen at zero.

Path ``i`` always uses substream ``i`` of the master seed (see :mod:`rng`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GbmParams, LeverageVector, MarketConfig, expected_log_growth, log_return_variance
from .errors import DimensionError, NumericDomainError
from .estimation import InstrumentPanel
from .rng import map_units, master_key, substream

#: Largest admissible |log price| or |log capital| before exp() overflows.
LOG_OVERFLOW = 700.0

MODES = ("exact", "rebalanced")


@dataclass(frozen=True)
class SimulationSpec:
    params: GbmParams
    leverage: LeverageVector
    market: MarketConfig
    horizon_years: float
    steps_per_year: int
    n_paths: int
    seed: int

    def __post_init__(self):
        if not self.horizon_years > 0:
            raise NumericDomainError(f"horizon_years must be positive, got {self.horizon_years}")
        if int(self.steps_per_year) != self.steps_per_year or self.steps_per_year < 1:
            raise NumericDomainError(f"steps_per_year must be a positive integer, got {self.steps_per_year}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise NumericDomainError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise NumericDomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.leverage.m != self.params.m:
            raise DimensionError(
                f"leverage has {self.leverage.m} entries but params describe {self.params.m} instruments"
            )
        if self.n_steps < 1:
            raise NumericDomainError("horizon is shorter than one step")

    @property
    def dt(self) -> float:
        return 1.0 / self.steps_per_year

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_years * self.steps_per_year))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class CapitalPaths:
    """Simulated capital, one row per path, normalized to ``A[0] = 1``.

    ``ruin_step[i]`` is the first step at which path ``i`` hit zero, or -1.
    """

    times: np.ndarray
    values: np.ndarray
    ruin_step: np.ndarray
    mode: str

    @property
    def ruined(self) -> np.ndarray:
        return self.ruin_step >= 0

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def terminal_log(self) -> np.ndarray:
        """``log A[T]``; ``-inf`` for ruined paths."""
        with np.errstate(divide="ignore"):
            return np.log(self.values[:, -1])


def _log_price_increments(gen: np.random.Generator, spec: SimulationSpec) -> np.ndarray:
    p = spec.params
    dt = spec.dt
    z = gen.standard_normal((spec.n_steps, p.m))
    drift = (p.mu - 0.5 * p.sigma**2) * dt
    return drift + (z @ p.chol.T) * math.sqrt(dt)


def _guard(logs: np.ndarray, what: str):
    if np.any(np.abs(logs) > LOG_OVERFLOW):
        raise NumericDomainError(f"simulated log {what} exceeds {LOG_OVERFLOW:g} in magnitude; shorten the horizon")


def price_path(spec: SimulationSpec, index: int, key=None) -> np.ndarray:
    """Prices of path ``index``, shape ``(n_steps + 1, m)``, starting at 1."""
    gen = substream(spec.seed, index, key)
    logp = np.vstack([np.zeros((1, spec.params.m)), np.cumsum(_log_price_increments(gen, spec), axis=0)])
    _guard(logp, "price")
    return np.exp(logp)


def simulate_price_paths(spec: SimulationSpec, workers: int = 1) -> np.ndarray:
    """All price paths, shape ``(n_paths, n_steps + 1, m)``."""
    key = master_key(spec.seed)

    def block(a, b):
        return [price_path(spec, i, key) for i in range(a, b)]

    return np.stack(map_units(block, spec.n_paths, workers))


def _exact_capital(spec: SimulationSpec, index: int, key) -> tuple[np.ndarray, int]:
    gen = substream(spec.seed, index, key)
    dt = spec.dt
    mean = expected_log_growth(spec.params, spec.leverage, spec.market) * dt
    sd = math.sqrt(log_return_variance(spec.params, spec.leverage) * dt)
    z = gen.standard_normal(spec.n_steps)
    loga = np.concatenate([[0.0], np.cumsum(mean + sd * z)])
    _guard(loga, "capital")
    return np.exp(loga), -1


def rebalance_growth_factors(simple_returns: np.ndarray, k: np.ndarray, cash_return: float) -> np.ndarray:
    """Per-step capital multipliers ``1 + (1 - kappa) * cash + k . R``."""
    return 1.0 + (1.0 - k.sum()) * cash_return + simple_returns @ k


def compound_with_ruin(factors: np.ndarray, start: float = 1.0) -> tuple[np.ndarray, int]:
    """Cumulative product of ``factors``; frozen at zero from the first factor <= 0.

    Returns the path (length ``len(factors) + 1``) and the 1-based step of
    ruin, or -1.
    """
    values = np.empty(factors.size + 1)
    values[0] = start
    bust = np.flatnonzero(factors <= 0.0)
    stop = bust[0] if bust.size else factors.size
    with np.errstate(over="raise"):
        values[1 : stop + 1] = start * np.cumprod(factors[:stop])
    if bust.size:
        values[stop + 1 :] = 0.0
        return values, int(stop + 1)
    return values, -1


def _rebalanced_capital(spec: SimulationSpec, index: int, key) -> tuple[np.ndarray, int]:
    gen = substream(spec.seed, index, key)
    inc = _log_price_increments(gen, spec)
    _guard(np.cumsum(inc, axis=0), "price")
    cash = math.expm1(spec.market.risk_free_rate * spec.dt)
    factors = rebalance_growth_factors(np.expm1(inc), spec.leverage.k, cash)
    try:
        return compound_with_ruin(factors)
    except FloatingPointError:
        raise NumericDomainError("simulated capital overflowed; shorten the horizon") from None


def simulate_capital_paths(spec: SimulationSpec, mode: str = "exact", workers: int = 1) -> CapitalPaths:
    """Capital paths under constant leverage ``spec.leverage``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    one = _exact_capital if mode == "exact" else _rebalanced_capital
    key = master_key(spec.seed)

    def block(a, b):
        return [one(spec, i, key) for i in range(a, b)]

    results = map_units(block, spec.n_paths, workers)
    values = np.stack([v for v, _ in results])
    ruin = np.array([s for _, s in results], dtype=int)
    return CapitalPaths(times=spec.times, values=values, ruin_step=ruin, mode=mode)


def capital_summary(spec: SimulationSpec, paths: CapitalPaths) -> dict:
    """Monte Carlo moments of ``log A[T]`` next to their closed-form values."""
    horizon = spec.n_steps * spec.dt
    L = expected_log_growth(spec.params, spec.leverage, spec.market)
    V = log_return_variance(spec.params, spec.leverage)
    alive = ~paths.ruined
    logs = paths.terminal_log()[alive]
    out = {
        "mode": paths.mode,
        "n_paths": int(paths.n_paths),
        "n_ruined": int((~alive).sum()),
        "horizon_years": horizon,
        "theory": {
            "mean_log_capital": L * horizon,
            "sd_log_capital": math.sqrt(V * horizon),
            "expected_log_growth": L,
            "log_return_variance": V,
        },
    }
    if logs.size >= 2:
        qs = np.quantile(logs, [0.05, 0.5, 0.95])
        out["sample"] = {
            "mean_log_capital": float(np.mean(logs)),
            "sd_log_capital": float(np.std(logs, ddof=1)),
            "q05_log_capital": float(qs[0]),
            "median_log_capital": float(qs[1]),
            "q95_log_capital": float(qs[2]),
        }
    else:
        out["sample"] = None
    return out


def panel_from_prices(
    prices: np.ndarray,
    instrument_ids,
    start_date="2001-01-01",
    scale: float = 100.0,
) -> InstrumentPanel:
    """Wrap a simulated price matrix in a panel dated on consecutive business days."""
    prices = np.asarray(prices, dtype=float)
    first = np.busday_offset(np.datetime64(start_date, "D"), 0, roll="forward")
    dates = np.busday_offset(first, np.arange(prices.shape[0]))
    return InstrumentPanel(tuple(instrument_ids), dates, prices * scale)


def simulate_panel(
    params: GbmParams,
    market: MarketConfig,
    years: float,
    seed: int,
    instrument_ids=None,
    start_date="2001-01-01",
    index: int = 0,
) -> InstrumentPanel:
    """One synthetic daily price panel (``years * T + 1`` rows) from path ``index``."""
    ids = instrument_ids or tuple(f"asset{j + 1}" for j in range(params.m))
    spec = SimulationSpec(
        params=params,
        leverage=LeverageVector(np.zeros(params.m)),
        market=market,
        horizon_years=years,
        steps_per_year=market.trading_days_per_year,
        n_paths=index + 1,
        seed=seed,
    )
    return panel_from_prices(price_path(spec, index), ids, start_date)
