"""Command-line front-end.

Subcommands: ``estimate``, ``optimize``, ``backtest``, ``simulate`` and
``evaluate-fund``. Settings come from flags, then an optional JSON config
file (``--config``), then built-in defaults. Every artifact of a run is
computed in memory first and then written atomically.

Exit codes: 0 success, 2 parse/config error, 3 numeric-domain error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .backtest import run_backtest
from .core import LeverageVector, MarketConfig, predictive_log_return
from .errors import InputError, KellyError, NumericDomainError, RuinError, StorageError
from .estimation import apply_tax_adjustment, daily_log_returns, daily_tax_drag, estimate_gbm_params
from .formats import (
    SCHEMA_VERSION,
    dumps,
    fmt_float,
    ingest_panel,
    load_params,
    panel_to_csv,
    params_to_dict,
    read_returns,
    write_atomic,
)
from .fund_eval import bootstrap_interval, reverse_engineer, summarize_returns, to_log_returns
from .optimizer import constrained_kelly, fractional_kelly, full_kelly, growth_profile
from .simulation import SimulationSpec, capital_summary, panel_from_prices, price_path, simulate_capital_paths

log = logging.getLogger("kellyfrac")

OUTPUT_DIR_ENV = "KELLYFRAC_OUTPUT_DIR"
COMMANDS = ("estimate", "optimize", "backtest", "simulate", "evaluate-fund")

DEFAULTS = {
    "risk_free_rate": 0.0,
    "trading_days": 260,
    "tax_rates": None,
    "initial_capital": 1.0,
    "seed": 0,
    "workers": 1,
    "horizon_years": 1.0,
    "steps_per_year": None,
    "n_paths": 10_000,
    "mode": "exact",
    "panels": 1,
    "periods_per_year": 1.0,
    "bootstrap": 10_000,
    "level": 0.90,
    "returns_kind": "log",
    "plots": True,
    "repair_correlation": False,
    "start_date": "2001-01-01",
}


@dataclass
class RunConfig:
    command: str
    out_dir: Path
    prices: list = field(default_factory=list)
    params: Optional[Path] = None
    returns: Optional[Path] = None
    leverage: Optional[str] = None
    instruments: Optional[list] = None
    tax_rates: Optional[list] = None
    risk_free_rate: float = 0.0
    trading_days: int = 260
    initial_capital: float = 1.0
    seed: int = 0
    workers: int = 1
    horizon_years: float = 1.0
    steps_per_year: Optional[int] = None
    n_paths: int = 10_000
    mode: str = "exact"
    panels: int = 1
    periods_per_year: float = 1.0
    bootstrap: int = 10_000
    level: float = 0.90
    returns_kind: str = "log"
    plots: bool = True
    repair_correlation: bool = False
    start_date: str = "2001-01-01"

    @property
    def market(self) -> MarketConfig:
        return MarketConfig(self.risk_free_rate, self.trading_days)

    def validate(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        needs = {
            "estimate": ("prices",),
            "optimize": ("params", "leverage"),
            "backtest": ("prices", "leverage"),
            "simulate": ("params", "leverage"),
            "evaluate-fund": ("returns",),
        }[self.command]
        for name in needs:
            if not getattr(self, name):
                raise InputError(f"{self.command} requires --{name}")
        for p in [*self.prices, self.params, self.returns]:
            if p is not None and not Path(p).is_file():
                raise StorageError(f"input file not found: {p}")
        if self.out_dir.exists() and not self.out_dir.is_dir():
            raise StorageError(f"output path {self.out_dir} is not a directory")
        self.market  # validates rate and calendar
        return self


def parse_tax_rates(text) -> Optional[list]:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse tax rates {text!r}") from None


def resolve_leverage(spec: str, params, market: MarketConfig) -> tuple[LeverageVector, dict]:
    """Turn a leverage spec into a vector.

    Accepted forms: ``full-kelly``, ``fractional:ALPHA``, ``constrained:KAPPA``
    or an explicit comma-separated vector such as ``1.33,0.67``.
    """
    text = spec.strip().lower()
    try:
        if text == "full-kelly":
            return full_kelly(params, market), {"kind": "full-kelly"}
        if text.startswith("fractional:"):
            alpha = float(text.split(":", 1)[1])
            return fractional_kelly(params, market, alpha), {"kind": "fractional", "alpha": alpha}
        if text.startswith("constrained:"):
            kappa0 = float(text.split(":", 1)[1])
            sol = constrained_kelly(params, market, kappa0)
            return sol.k, {"kind": "constrained", "kappa_target": kappa0, "lagrange_multiplier": sol.lam}
        k = LeverageVector([float(x) for x in text.split(",")])
    except ValueError as exc:
        if isinstance(exc, NumericDomainError):
            raise
        raise InputError(f"cannot parse leverage spec {spec!r}") from None
    if k.m != params.m:
        raise InputError(f"leverage spec {spec!r} has {k.m} entries for {params.m} instruments")
    return k, {"kind": "explicit"}


def _growth_dict(profile) -> dict:
    return {
        "expected_log_growth": profile.expected_log_growth,
        "log_return_variance": profile.log_return_variance,
        "log_return_sd": profile.log_return_sd,
        "sharpe": profile.sharpe,
        "kelly_fraction": profile.kelly_fraction,
        "exceeds_kelly": profile.exceeds_kelly,
    }


def _header(kind: str, cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "risk_free_rate": cfg.risk_free_rate,
        "trading_days_per_year": cfg.trading_days,
    }


def _select_instruments(params, ids, wanted):
    if not wanted:
        return params, ids
    missing = [w for w in wanted if w not in ids]
    if missing:
        raise InputError(f"unknown instruments {missing}; available: {ids}")
    idx = [ids.index(w) for w in wanted]
    return params.marginal(idx), list(wanted)


def _ingest(cfg: RunConfig):
    ingest = ingest_panel(cfg.prices)
    for f, n in ingest.dropped.items():
        if n:
            log.info("%s: dropped %d rows not shared by every file", f, n)
    return ingest


def cmd_estimate(cfg: RunConfig) -> dict:
    ingest = _ingest(cfg)
    panel = ingest.panel
    pre = estimate_gbm_params(daily_log_returns(panel), cfg.market, repair=cfg.repair_correlation)
    rates = cfg.tax_rates if cfg.tax_rates is not None else [0.0] * panel.m
    post = apply_tax_adjustment(pre, rates)
    ids = list(panel.instrument_ids)
    report = _header("estimate", cfg)
    report.update(
        {
            "n_dates": panel.n,
            "first_date": panel.dates[0],
            "last_date": panel.dates[-1],
            "dropped_rows": ingest.dropped,
            "tax_rates": rates,
            "pre_tax": params_to_dict(pre, ids),
            "post_tax": params_to_dict(post, ids),
        }
    )
    return {"estimate.json": dumps(report)}


def cmd_optimize(cfg: RunConfig) -> dict:
    pf = load_params(cfg.params)
    params, ids = _select_instruments(pf.params, pf.instrument_ids, cfg.instruments)
    market = cfg.market
    k, info = resolve_leverage(cfg.leverage, params, market)
    kstar = full_kelly(params, market)
    profile = growth_profile(k, params, market)
    report = _header("optimize", cfg)
    report.update(
        {
            "instrument_ids": ids,
            "leverage_spec": cfg.leverage,
            "leverage": info,
            "k": k.k,
            "kappa": k.kappa,
            "cash_fraction": 1.0 - k.kappa,
            "growth": _growth_dict(profile),
            "full_kelly": {"k": kstar.k, "kappa": kstar.kappa},
        }
    )
    return {"optimize.json": dumps(report)}


def _backtest_inputs(cfg: RunConfig, panel):
    """Post-tax params for leverage, plus the daily drag to replay."""
    market = cfg.market
    if cfg.params is not None:
        pf = load_params(cfg.params)
        ids = pf.instrument_ids
        if sorted(ids) != sorted(panel.instrument_ids):
            raise InputError(f"params instruments {ids} do not match panel instruments {list(panel.instrument_ids)}")
        panel = panel.select(ids)
        if pf.pre_tax is not None and cfg.tax_rates is None:
            rates = pf.tax_rates if pf.tax_rates is not None else np.zeros(pf.params.m)
            return panel, pf.params, daily_tax_drag(pf.pre_tax, rates, market), rates
        pre = pf.pre_tax if pf.pre_tax is not None else pf.params
    else:
        pre = estimate_gbm_params(daily_log_returns(panel), market, repair=cfg.repair_correlation)
    rates = np.asarray(cfg.tax_rates if cfg.tax_rates is not None else np.zeros(pre.m), dtype=float)
    return panel, apply_tax_adjustment(pre, rates), daily_tax_drag(pre, rates, market), rates


def cmd_backtest(cfg: RunConfig) -> dict:
    ingest = _ingest(cfg)
    panel, params, drag, rates = _backtest_inputs(cfg, ingest.panel)
    market = cfg.market
    k, info = resolve_leverage(cfg.leverage, params, market)
    rep = run_backtest(panel, k, market, daily_drift_adjust=drag, initial_capital=cfg.initial_capital)
    dd = rep.max_drawdown
    report = _header("backtest", cfg)
    report.update(
        {
            "instrument_ids": list(panel.instrument_ids),
            "leverage_spec": cfg.leverage,
            "leverage": info,
            "k": k.k,
            "kappa": k.kappa,
            "tax_rates": rates,
            "daily_drift_adjust": drag,
            "initial_capital": cfg.initial_capital,
            "first_date": panel.dates[0],
            "last_date": panel.dates[-1],
            "n_days": panel.n - 1,
            "dropped_rows": ingest.dropped,
            "annualized_log_growth": rep.annualized_log_growth,
            "annualized_log_sd": rep.annualized_log_sd,
            "max_drawdown": {
                "fraction": dd.fraction,
                "peak_date": dd.peak_date,
                "trough_date": dd.trough_date,
            },
            "final_value": rep.final_value,
            "ruined": rep.ruined,
            "ruin_date": rep.ruin_date,
            "predicted": _growth_dict(growth_profile(k, params, market)),
        }
    )
    csv_lines = ["date,capital"] + [f"{d},{fmt_float(v)}" for d, v in zip(rep.path.dates, rep.path.values)]
    out = {"backtest.json": dumps(report), "capital.csv": "\n".join(csv_lines) + "\n"}
    if cfg.plots:
        from .plotting import render_capital, render_log_capital

        title = f"k = ({', '.join(f'{x:.3g}' for x in k.k)})"
        out["capital.svg"] = render_capital(rep.path.dates, rep.path.values, dd, title=f"Capital, {title}")
        out["log_capital.svg"] = render_log_capital(rep.path.dates, rep.path.values, dd, title=f"Log capital, {title}")
    if rep.ruined:
        out["__ruined__"] = f"capital path ruined on {rep.ruin_date}"
    return out


def cmd_simulate(cfg: RunConfig) -> dict:
    pf = load_params(cfg.params)
    params, ids = _select_instruments(pf.params, pf.instrument_ids, cfg.instruments)
    market = cfg.market
    k, info = resolve_leverage(cfg.leverage, params, market)
    spec = SimulationSpec(
        params=params,
        leverage=k,
        market=market,
        horizon_years=cfg.horizon_years,
        steps_per_year=cfg.steps_per_year or cfg.trading_days,
        n_paths=cfg.n_paths,
        seed=cfg.seed,
    )
    paths = simulate_capital_paths(spec, mode=cfg.mode, workers=cfg.workers)
    summary = capital_summary(spec, paths)
    theory = predictive_log_return(params, k, market, spec.n_steps * spec.dt)
    terminal = paths.terminal_log()
    alive = np.isfinite(terminal)
    if alive.sum() >= 2 and theory.variance > 0:
        ks = stats.kstest(terminal[alive], "norm", args=(theory.mean, theory.sd))
        summary["ks_test"] = {"statistic": float(ks.statistic), "p_value": float(ks.pvalue)}
    report = _header("simulate", cfg)
    report.update(
        {
            "instrument_ids": ids,
            "leverage_spec": cfg.leverage,
            "leverage": info,
            "k": k.k,
            "kappa": k.kappa,
            "seed": cfg.seed,
            "steps_per_year": spec.steps_per_year,
            "n_steps": spec.n_steps,
            "summary": summary,
        }
    )
    out = {"simulate.json": dumps(report)}
    n_panels = min(cfg.panels, spec.n_paths)
    if n_panels and spec.n_steps >= 2:
        for i in range(n_panels):
            panel = panel_from_prices(price_path(spec, i), ids, cfg.start_date)
            out[f"panel_{i:03d}.csv"] = panel_to_csv(panel)
    if cfg.plots:
        from .plotting import render_path_fan, render_terminal_distribution

        out["terminal_log_capital.svg"] = render_terminal_distribution(terminal, theory.mean, theory.sd)
        out["capital_fan.svg"] = render_path_fan(paths.times, paths.values[: min(2000, paths.n_paths)])
    if summary["n_ruined"] == paths.n_paths:
        raise RuinError(f"all {paths.n_paths} simulated paths were ruined")
    return out


def cmd_evaluate_fund(cfg: RunConfig) -> dict:
    raw = read_returns(cfg.returns)
    logs = raw if cfg.returns_kind == "log" else to_log_returns(raw)
    summary = summarize_returns(logs, cfg.periods_per_year)
    market = cfg.market
    res = reverse_engineer(summary, market)
    report = _header("evaluate-fund", cfg)
    report.update(
        {
            "returns_kind": cfg.returns_kind,
            "periods_per_year": summary.periods_per_year,
            "n_observations": summary.n_observations,
            "mean_log_return": summary.mean_log_return,
            "log_return_variance": summary.log_return_variance,
            "log_return_sd": math.sqrt(summary.log_return_variance),
            "alpha": res.alpha,
            "sharpe": res.sharpe,
            "risk_class": res.risk_class,
        }
    )
    if cfg.bootstrap > 0:
        ci = bootstrap_interval(summary, market, cfg.bootstrap, cfg.seed, cfg.level, cfg.workers)
        report["bootstrap"] = {
            "seed": cfg.seed,
            "level": ci.level,
            "n_replicates": ci.n_replicates,
            "n_failed": ci.n_failed,
            "alpha": [ci.alpha_low, ci.alpha_high],
            "sharpe": [ci.sharpe_low, ci.sharpe_high],
        }
    return {"fund.json": dumps(report)}


HANDLERS = {
    "estimate": cmd_estimate,
    "optimize": cmd_optimize,
    "backtest": cmd_backtest,
    "simulate": cmd_simulate,
    "evaluate-fund": cmd_evaluate_fund,
}


def run(cfg: RunConfig) -> tuple[int, list]:
    """Execute one command; returns ``(exit_status, written_paths)``."""
    cfg.validate()
    artifacts = HANDLERS[cfg.command](cfg)
    note = artifacts.pop("__ruined__", None)
    written = [write_atomic(cfg.out_dir / name, data) for name, data in artifacts.items()]
    if note:
        log.error("%s", note)
        return RuinError.exit_code, written
    return 0, written


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(InputError.exit_code, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of default settings (flags override it)")
    common.add_argument("--out", "-o", type=Path, dest="out_dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./kellyfrac-out)")
    common.add_argument("--risk-free-rate", type=float, help="per-annum continuously compounded rate (default 0)")
    common.add_argument("--trading-days", type=int, help="trading days per year (default 260)")
    common.add_argument("--seed", type=int, help="master seed for stochastic commands (default 0)")
    common.add_argument("--workers", type=int, help="threads for Monte Carlo and bootstrap work (default 1)")
    common.add_argument("--no-plots", dest="plots", action="store_const", const=False, help="skip SVG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="kellyfrac", description="Kelly growth analytics for GBM portfolios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    p = add("estimate", "Estimate GBM parameters from price CSVs.")
    p.add_argument("--prices", nargs="+", type=Path, help="wide CSV or one date,adj_close CSV per instrument")
    p.add_argument("--tax-rates", help="comma-separated per-instrument tax rates in [0, 1)")
    p.add_argument("--repair-correlation", action="store_const", const=True, help="clip eigenvalues of an indefinite correlation estimate")

    lev_help = "full-kelly | fractional:ALPHA | constrained:KAPPA | explicit vector like 1.33,0.67"

    p = add("optimize", "Compute a leverage vector and its growth profile.")
    p.add_argument("--params", type=Path, help="parameters JSON (estimate report or {mu, sigma, corr} / {mu, cov})")
    p.add_argument("--leverage", help=lev_help)
    p.add_argument("--instrument", action="append", dest="instruments", help="restrict to these instruments (repeatable)")

    p = add("backtest", "Replay a constant-leverage policy on historical prices.")
    p.add_argument("--prices", nargs="+", type=Path)
    p.add_argument("--params", type=Path, help="parameters JSON; estimated from the prices when omitted")
    p.add_argument("--leverage", help=lev_help)
    p.add_argument("--tax-rates", help="per-instrument tax rates; the drift haircut is replayed as a daily drag")
    p.add_argument("--initial-capital", type=float)
    p.add_argument("--repair-correlation", action="store_const", const=True)

    p = add("simulate", "Monte Carlo capital paths and synthetic price panels.")
    p.add_argument("--params", type=Path)
    p.add_argument("--leverage", help=lev_help)
    p.add_argument("--instrument", action="append", dest="instruments")
    p.add_argument("--horizon-years", type=float)
    p.add_argument("--steps-per-year", type=int, help="default: trading days per year")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--mode", choices=["exact", "rebalanced"])
    p.add_argument("--panels", type=int, help="number of synthetic price panels to write (default 1)")
    p.add_argument("--start-date", help="first date of synthetic panels")

    p = add("evaluate-fund", "Infer Sharpe ratio and Kelly fraction from a fund's returns.")
    p.add_argument("--returns", type=Path, help="one-column CSV of per-period returns")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--log-returns", dest="returns_kind", action="store_const", const="log")
    kind.add_argument("--simple-returns", dest="returns_kind", action="store_const", const="simple")
    p.add_argument("--periods-per-year", type=float)
    p.add_argument("--bootstrap", type=int, help="bootstrap replicates (0 to skip; default 10000)")
    p.add_argument("--level", type=float, help="two-sided bootstrap interval level (default 0.90)")
    return parser


def _load_config_file(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StorageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def config_from_args(ns: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge flags over the config file over defaults."""
    file_cfg = _load_config_file(getattr(ns, "config", None))
    fields = set(RunConfig.__dataclass_fields__) - {"command"}
    unknown = set(file_cfg) - fields
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")

    def pick(name, default=None):
        v = getattr(ns, name, None)
        if v is None:
            v = file_cfg.get(name)
        if v is None:
            v = DEFAULTS.get(name, default)
        return v

    out_dir = pick("out_dir") or environ.get(OUTPUT_DIR_ENV) or "kellyfrac-out"
    prices = pick("prices") or []
    try:
        cfg = RunConfig(
            command=ns.command,
            out_dir=Path(out_dir),
            prices=[Path(p) for p in prices],
            params=Path(pick("params")) if pick("params") else None,
            returns=Path(pick("returns")) if pick("returns") else None,
            leverage=pick("leverage"),
            instruments=pick("instruments"),
            tax_rates=parse_tax_rates(pick("tax_rates")),
            risk_free_rate=float(pick("risk_free_rate")),
            trading_days=int(pick("trading_days")),
            initial_capital=float(pick("initial_capital")),
            seed=int(pick("seed")),
            workers=int(pick("workers")),
            horizon_years=float(pick("horizon_years")),
            steps_per_year=pick("steps_per_year"),
            n_paths=int(pick("n_paths")),
            mode=pick("mode"),
            panels=int(pick("panels")),
            periods_per_year=float(pick("periods_per_year")),
            bootstrap=int(pick("bootstrap")),
            level=float(pick("level")),
            returns_kind=pick("returns_kind"),
            plots=bool(pick("plots")),
            repair_correlation=bool(pick("repair_correlation")),
            start_date=pick("start_date"),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad configuration value: {exc}") from None
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.INFO,
        format="%(name)s: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = config_from_args(ns)
        status, written = run(cfg)
    except KellyError as exc:
        log.error("%s", exc)
        return exc.exit_code
    for p in written:
        log.info("wrote %s", p)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
