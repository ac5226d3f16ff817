"""SVG figures for tails, inequality series and return densities.

Text stays text in the output (no glyph-to-path conversion) so tick labels
and titles remain searchable in the rendered files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.ticker import FuncFormatter, LogLocator

from nlkesten.tailstats import EmpiricalTail, PowerLawFit, kernel_density

_SAVE_OPTS = {"format": "svg", "metadata": {"Date": None}}


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    return fig, ax


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context({"svg.fonttype": "none"}):
        fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path


def tail_figure(tails: dict[str, EmpiricalTail], path: str | Path,
                fits: dict[str, PowerLawFit] | None = None,
                unit: str = "GBP") -> Path:
    """Log-log CCDF with optional fitted power-law overlays."""
    if not tails:
        raise ValueError("need at least one tail to plot")
    fig, ax = _new_axes()
    for label, tail in tails.items():
        keep = tail.exceedance > 0.0
        ax.loglog(tail.wealth[keep], tail.exceedance[keep],
                  drawstyle="steps-post", linewidth=1.0, label=label)
    for label, fit in (fits or {}).items():
        lo, hi = fit.window
        ax.loglog([lo, hi],
                  [fit.alpha_coef * lo**-fit.beta,
                   fit.alpha_coef * hi**-fit.beta],
                  linestyle="--", linewidth=1.2,
                  label=f"{label}: beta = {fit.beta:.2f}")
    ax.set_xlabel(f"wealth ({unit})")
    ax.set_ylabel("exceedance fraction")
    for axis in (ax.xaxis, ax.yaxis):
        axis.set_major_locator(LogLocator(base=10.0))
        # Plain 1eN decade labels survive as literal SVG text.
        axis.set_major_formatter(FuncFormatter(
            lambda v, _: f"1e{int(round(np.log10(v)))}" if v > 0 else ""))
        axis.set_minor_formatter(FuncFormatter(lambda v, _: ""))
    ax.legend(loc="lower left", fontsize=8)
    return _finish(fig, path)


def series_figure(series, path: str | Path) -> Path:
    """Gini and top-1% share against step count, bankruptcies on a twin."""
    steps = series[:, 0]
    fig, ax = _new_axes()
    ax.plot(steps, series[:, 1], label="gini")
    ax.plot(steps, series[:, 2], label="top 1% share")
    ax.set_xlabel("step")
    ax.set_ylabel("index value")
    ax.set_ylim(0.0, 1.05)
    twin = ax.twinx()
    twin.plot(steps, series[:, 3], color="grey", linewidth=0.8,
              label="bankruptcies")
    twin.set_ylabel("bankruptcies (cumulative)")
    handles, labels = ax.get_legend_handles_labels()
    more, more_labels = twin.get_legend_handles_labels()
    ax.legend(handles + more, labels + more_labels, loc="upper left",
              fontsize=8)
    return _finish(fig, path)


def density_figure(samples, path: str | Path,
                   label: str = "return multiplier alpha") -> Path:
    """Kernel density of a sample, linear axes."""
    grid, dens = kernel_density(samples)
    fig, ax = _new_axes()
    ax.plot(grid, dens)
    ax.set_xlabel(label)
    ax.set_ylabel("density")
    return _finish(fig, path)
