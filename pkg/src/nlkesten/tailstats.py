"""Empirical tails, power-law and lognormal fits, percentiles, kernel density.

The central object is the empirical tail P_N(X > x): the fraction of the
sample strictly exceeding each distinct observed value. Power-law fitting is
a plain least-squares line on the double-logarithmic tail, deliberately kept
simple; the estimator is biased for short windows and that caveat travels
with the result rather than being corrected away.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from nlkesten.errors import (EmptyInput, InsufficientPoints, MissingPercentile,
                             ZeroVariance)


@dataclass(frozen=True)
class EmpiricalTail:
    """Sorted (wealth, exceedance) points, optionally with household count."""

    wealth: np.ndarray
    exceedance: np.ndarray
    households_total: int | None = None

    def __post_init__(self):
        w = np.asarray(self.wealth, dtype=float)
        p = np.asarray(self.exceedance, dtype=float)
        if w.size == 0:
            raise EmptyInput("tail has no points")
        if w.size != p.size:
            raise ValueError("wealth and exceedance lengths differ")
        if np.any(np.diff(w) <= 0.0):
            raise ValueError("wealth must be strictly increasing")
        if np.any(np.diff(p) > 0.0):
            raise ValueError("exceedance must be non-increasing")
        if p[0] > 1.0 or p[-1] < 0.0:
            raise ValueError("exceedance must lie in [0, 1]")
        object.__setattr__(self, "wealth", w)
        object.__setattr__(self, "exceedance", p)

    def __len__(self) -> int:
        return int(self.wealth.size)


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted tail alpha_coef * x**(-beta) with its window and fit quality."""

    alpha_coef: float
    beta: float
    window: tuple[float, float]
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("fitted tail exponent must be positive")
        if not self.window[0] < self.window[1]:
            raise ValueError("fit window must have w_lo < w_hi")


@dataclass(frozen=True)
class LognormalFit:
    """Log-wealth moments and the KS distance to the implied lognormal."""

    mu_log: float
    sigma_log: float
    ks_distance: float

    def __post_init__(self):
        if self.sigma_log <= 0.0:
            raise ValueError("sigma_log must be positive")
        if not 0.0 <= self.ks_distance <= 1.0:
            raise ValueError("ks_distance must lie in [0, 1]")


def _as_sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyInput("sample is empty")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("sample values must be finite and positive")
    return x


def empirical_tail(sample) -> EmpiricalTail:
    """Exceedance (count strictly above x) / N at each distinct value."""
    x = np.sort(_as_sample(sample))
    n = x.size
    values, counts = np.unique(x, return_counts=True)
    exceed = (n - np.cumsum(counts)) / n
    return EmpiricalTail(values, exceed, households_total=n)


def default_window(tail: EmpiricalTail) -> tuple[float, float]:
    """Fit window [99th-percentile wealth, largest wealth with at least ten
    exceeding households]. Requires a household count on the tail."""
    if tail.households_total is None:
        raise InsufficientPoints(
            "tail has no household count; pass an explicit window")
    lo = percentile_wealth(tail, 0.01)
    thresh = 10.0 / tail.households_total
    eligible = tail.wealth[tail.exceedance >= thresh]
    if eligible.size == 0:
        raise InsufficientPoints("no tail point has ten exceeding households")
    return float(lo), float(eligible[-1])


def fit_power_law(tail: EmpiricalTail, window: tuple[float, float] | None = None,
                  ) -> PowerLawFit:
    """Least-squares line on (log wealth, log exceedance) inside the window.

    beta is the negated slope and alpha_coef the exponentiated intercept.
    Points with zero exceedance carry no information on a log scale and are
    ignored. Raises InsufficientPoints when fewer than three usable points
    remain.
    """
    if window is None:
        window = default_window(tail)
    w_lo, w_hi = float(window[0]), float(window[1])
    keep = ((tail.wealth >= w_lo) & (tail.wealth <= w_hi)
            & (tail.exceedance > 0.0))
    if int(keep.sum()) < 3:
        raise InsufficientPoints(
            f"{int(keep.sum())} usable points in window [{w_lo:g}, {w_hi:g}]")
    lx = np.log(tail.wealth[keep])
    ly = np.log(tail.exceedance[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return PowerLawFit(alpha_coef=float(np.exp(intercept)), beta=float(-slope),
                       window=(w_lo, w_hi), r_squared=r2,
                       n_points=int(keep.sum()))


def fit_lognormal(sample) -> LognormalFit:
    """Moment fit of log-wealth with an exact KS distance against it."""
    x = _as_sample(sample)
    logs = np.log(x)
    if np.ptp(logs) == 0.0:
        raise ZeroVariance("all sample values are equal")
    mu = float(logs.mean())
    sigma = float(logs.std())
    z = np.sort((logs - mu) / sigma)
    cdf = special.ndtr(z)
    n = z.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    ks = float(max(np.max(hi - cdf), np.max(cdf - lo)))
    return LognormalFit(mu_log=mu, sigma_log=sigma, ks_distance=ks)


def percentile_wealth(tail_or_sample, p: float) -> float:
    """Smallest wealth whose exceedance is at most p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    tail = (tail_or_sample if isinstance(tail_or_sample, EmpiricalTail)
            else empirical_tail(tail_or_sample))
    idx = int(np.argmax(tail.exceedance <= p))
    if tail.exceedance[idx] > p:
        # Sample tails always end at exceedance 0; only survey tails
        # truncated above p can land here.
        raise MissingPercentile(
            f"tail exceedance never drops to {p:g} "
            f"(smallest is {tail.exceedance[-1]:g})")
    return float(tail.wealth[idx])


def kernel_density(sample, bandwidth: float | None = None,
                   gridsize: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density on an even grid spanning data +- 3 bandwidths.

    The automatic bandwidth is the normal reference rule 1.06 * std * N^(-1/5).
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise EmptyInput("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample values must be finite")
    if bandwidth is None:
        sd = float(x.std())
        if sd == 0.0:
            raise ZeroVariance("constant sample needs an explicit bandwidth")
        bandwidth = 1.06 * sd * x.size ** (-0.2)
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(x.min() - 3.0 * bandwidth, x.max() + 3.0 * bandwidth,
                       gridsize)
    z = (grid[:, None] - x[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * bandwidth
                                               * math.sqrt(2.0 * math.pi))
    return grid, dens


# === serialisation =========================================================

def write_tail_csv(tail: EmpiricalTail, path) -> None:
    """CSV with header wealth,exceedance at full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wealth", "exceedance"])
        for w, p in zip(tail.wealth, tail.exceedance):
            writer.writerow([repr(float(w)), repr(float(p))])


def read_tail_csv(path, households_total: int | None = None) -> EmpiricalTail:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["wealth", "exceedance"]:
            raise ValueError(
                f"{path.name}: expected header wealth,exceedance, got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader]
    if not rows:
        raise EmptyInput(f"{path.name}: no tail points")
    w, p = zip(*rows)
    return EmpiricalTail(np.array(w), np.array(p),
                         households_total=households_total)
