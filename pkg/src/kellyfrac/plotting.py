"""Static SVG figures for backtests and simulations.

Every ``render_*`` function returns the SVG document as bytes; callers
decide where (and when) to write it. A fixed hash salt and a blank date
keep the bytes identical across runs.
"""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "kellyfrac",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (7.0, 3.6),
}


def _svg(fig) -> bytes:
    buf = io.BytesIO()
    try:
        fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    finally:
        plt.close(fig)
    return buf.getvalue()


def _shade_drawdown(ax, x, drawdown):
    if drawdown is None or drawdown.fraction <= 0:
        return
    ax.axvspan(
        x[drawdown.peak_index],
        x[drawdown.trough_index],
        color="tab:red",
        alpha=0.12,
        lw=0,
        label=f"max drawdown {100 * drawdown.fraction:.1f}%",
    )


def render_capital(x, values, drawdown=None, label="capital", title=None):
    """Capital on a log axis with the maximum-drawdown window shaded."""
    values = np.asarray(values, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        shown = np.where(values > 0, values, np.nan)
        ax.plot(x, shown, lw=1.0, color="tab:blue", label=label)
        _shade_drawdown(ax, x, drawdown)
        if np.any(values > 0):
            ax.set_yscale("log")
        ax.set_ylabel("capital")
        ax.set_title(title or "Capital")
        ax.legend(loc="upper left")
        fig.autofmt_xdate()
        return _svg(fig)


def render_log_capital(x, values, drawdown=None, label="log capital", title=None):
    """``log(A_t / A_0)`` on a linear axis."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(values / values[0])
    logs[~np.isfinite(logs)] = np.nan
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, logs, lw=1.0, color="tab:green", label=label)
        _shade_drawdown(ax, x, drawdown)
        ax.axhline(0.0, color="0.4", lw=0.6)
        ax.set_ylabel("log capital growth")
        ax.set_title(title or "Log capital")
        ax.legend(loc="upper left")
        fig.autofmt_xdate()
        return _svg(fig)


def render_terminal_distribution(terminal_logs, mean, sd, title=None):
    """Histogram of simulated terminal log-capital against its predicted normal law."""
    x = np.asarray(terminal_logs, dtype=float)
    x = x[np.isfinite(x)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if x.size:
            ax.hist(x, bins=min(80, max(10, int(math.sqrt(x.size)))), density=True, color="tab:blue", alpha=0.5,
                    label="simulated")
        if sd > 0:
            lo = min(mean - 4 * sd, x.min() if x.size else mean)
            hi = max(mean + 4 * sd, x.max() if x.size else mean)
            grid = np.linspace(lo, hi, 400)
            dens = np.exp(-0.5 * ((grid - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            ax.plot(grid, dens, color="tab:red", lw=1.2, label="predicted normal")
        ax.set_xlabel("terminal log capital")
        ax.set_ylabel("density")
        ax.set_title(title or "Terminal log capital")
        ax.legend()
        return _svg(fig)


def render_path_fan(times, values, n_show=50, title=None):
    """A handful of simulated capital paths plus the 5/50/95% envelopes."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(values)
    logs[~np.isfinite(logs)] = np.nan
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for row in logs[:n_show]:
            ax.plot(times, row, color="0.6", lw=0.4, alpha=0.6)
        if logs.shape[0] >= 3:
            q = np.nanquantile(logs, [0.05, 0.5, 0.95], axis=0)
            ax.plot(times, q[1], color="tab:blue", lw=1.2, label="median")
            ax.fill_between(times, q[0], q[2], color="tab:blue", alpha=0.15, label="5-95%")
            ax.legend(loc="upper left")
        ax.set_xlabel("years")
        ax.set_ylabel("log capital")
        ax.set_title(title or "Simulated log capital")
        return _svg(fig)
