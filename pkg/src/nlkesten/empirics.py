"""Survey ingestion and estimation: Lorenz tables to empirical tails,
rich-list merging, percentile rates of return, return-coefficient
extraction, exponent selection, power-law ROR fits, the mean-variance
diagnostic, and the savings-curve calibration.

All readers are strict: declared headers, complete rows, hard errors with
line numbers. Silent cleaning would quietly move fitted parameters.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from nlkesten.errors import (AllNonPositive, EmptyInput, FitDidNotConverge,
                             InsufficientBins, InsufficientPoints,
                             NonMonotoneWealth, Overlap, ZeroBucket)
from nlkesten.process import SavingsModel, savings_eval
from nlkesten.tailstats import EmpiricalTail, percentile_wealth


@dataclass(frozen=True)
class LorenzSurvey:
    """Cumulative (household share, wealth share) rows with totals."""

    year: int
    cum_household_prop: np.ndarray
    cum_wealth_prop: np.ndarray
    households_total: float
    wealth_total: float

    def __post_init__(self):
        h = np.asarray(self.cum_household_prop, dtype=float)
        w = np.asarray(self.cum_wealth_prop, dtype=float)
        if h.size < 2 or h.size != w.size:
            raise ValueError("survey needs matching columns with >= 2 rows")
        if h[0] != 0.0 or w[0] != 0.0 or h[-1] != 1.0 or w[-1] != 1.0:
            raise ValueError("survey must start at (0, 0) and end at (1, 1)")
        if np.any(np.diff(h) < 0.0) or np.any(np.diff(w) < 0.0):
            raise ValueError("survey columns must be non-decreasing")
        if self.households_total <= 0.0 or self.wealth_total <= 0.0:
            raise ValueError("totals must be positive")
        object.__setattr__(self, "cum_household_prop", h)
        object.__setattr__(self, "cum_wealth_prop", w)


@dataclass(frozen=True)
class RichList:
    """Wealth of the R richest households, ascending."""

    year: int
    wealth: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.wealth, dtype=float)
        if w.size == 0:
            raise EmptyInput("rich list has no entries")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("rich-list wealth must be positive and finite")
        if np.any(np.diff(w) < 0.0):
            raise ValueError("rich-list wealth must be ascending")
        object.__setattr__(self, "wealth", w)

    def __len__(self) -> int:
        return int(self.wealth.size)


@dataclass(frozen=True)
class RorSeries:
    """Per-percentile start wealth, annualised return and savings."""

    percentile: np.ndarray
    wealth: np.ndarray
    ror: np.ndarray
    savings: np.ndarray
    period_years: float

    def __post_init__(self):
        p = np.asarray(self.percentile, dtype=int)
        if p.size == 0:
            raise EmptyInput("ROR series has no records")
        if np.any(p < 1) or np.any(p > 100):
            raise ValueError("percentiles must lie in 1..100")
        if np.any(np.asarray(self.wealth) <= 0.0):
            raise ValueError("wealth must be positive")
        if self.period_years <= 0.0:
            raise ValueError("period_years must be positive")
        object.__setattr__(self, "percentile", p)
        for name in ("wealth", "ror", "savings"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class PowerFitROR:
    """Mean-return power law mu * w**(gamma - 1) with the alpha spread."""

    mu: float
    gamma: float
    sigma: float
    n_points: int
    n_excluded: int = 0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if self.gamma < 1.0:
            raise ValueError("gamma must be at least 1")


@dataclass(frozen=True)
class GammaSelection:
    gamma: float
    mismatch: float
    no_crossing: bool


@dataclass(frozen=True)
class MeanVarianceResult:
    ratio: float
    bin_ratios: np.ndarray
    bin_counts: np.ndarray
    bin_edges: np.ndarray


# === readers ===============================================================

def _read_strict_csv(path, header: list[str]) -> list[list[float]]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ValueError(
                f"{path.name}: expected header {','.join(header)}, got "
                f"{None if got is None else ','.join(got)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path.name}:{lineno}: expected "
                                 f"{len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as err:
                raise ValueError(f"{path.name}:{lineno}: {err}") from None
    if not rows:
        raise EmptyInput(f"{path.name}: no data rows")
    return rows


def read_survey_csv(csv_path, meta_path) -> LorenzSurvey:
    rows = _read_strict_csv(csv_path,
                            ["cum_household_prop", "cum_wealth_prop"])
    with open(meta_path) as fh:
        meta = json.load(fh)
    h, w = zip(*rows)
    return LorenzSurvey(year=int(meta["year"]),
                        cum_household_prop=np.array(h),
                        cum_wealth_prop=np.array(w),
                        households_total=float(meta["households_total"]),
                        wealth_total=float(meta["wealth_total_gbp"]))


def read_rich_list_csv(path, year: int = 0) -> RichList:
    rows = _read_strict_csv(path, ["rank", "wealth_gbp"])
    ranks = [int(r) for r, _ in rows]
    if sorted(ranks) != list(range(1, len(rows) + 1)):
        raise ValueError(f"{Path(path).name}: ranks must be exactly 1..R")
    by_rank = dict(zip(ranks, (w for _, w in rows)))
    desc = [by_rank[i] for i in range(1, len(rows) + 1)]
    if any(a < b for a, b in zip(desc, desc[1:])):
        raise ValueError(
            f"{Path(path).name}: wealth must be non-increasing in rank")
    return RichList(year=year, wealth=np.array(desc[::-1]))


def read_deciles_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """(median wealth, disposable income minus expenditure) per decile."""
    rows = _read_strict_csv(path, ["median_wealth_gbp",
                                   "disposable_income_gbp",
                                   "expenditure_gbp"])
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1] - arr[:, 2]


# === tails from surveys ====================================================

def lorenz_to_tail(survey: LorenzSurvey) -> EmpiricalTail:
    """Bucket-average wealth against the exceedance of each bucket's top.

    Bucket i holds (h[i+1]-h[i])*H households owning (w[i+1]-w[i])*W in
    total; its average wealth is paired with exceedance 1 - h[i+1].
    Zero-wealth buckets are dropped (only positive wealth enters a tail);
    equal consecutive averages collapse to one point.
    """
    dh = np.diff(survey.cum_household_prop) * survey.households_total
    dw = np.diff(survey.cum_wealth_prop) * survey.wealth_total
    if np.any(dh == 0.0):
        raise ZeroBucket("survey has a bucket with no households")
    mean_w = dw / dh
    exceed = 1.0 - survey.cum_household_prop[1:]
    keep = mean_w > 0.0
    mean_w, exceed = mean_w[keep], exceed[keep]
    if mean_w.size == 0:
        raise EmptyInput("survey has no positive-wealth buckets")
    if np.any(np.diff(mean_w) < 0.0):
        raise NonMonotoneWealth("bucket averages decrease; survey rows are "
                                "not ordered by wealth")
    # Equal averages: keep the last (smallest-exceedance) point.
    last = np.append(np.diff(mean_w) > 0.0, True)
    return EmpiricalTail(mean_w[last], exceed[last],
                         households_total=int(round(survey.households_total)))


def merge_rich_list(tail: EmpiricalTail, rich: RichList) -> EmpiricalTail:
    """Extend a survey tail with named top-R households.

    The i-th poorest rich entry has R - i households above it, hence
    exceedance (R - i)/H. Survey points claiming exceedance below R/H are
    contradicted by the rich list (all R entries sit above the whole
    survey) and are dropped before appending.
    """
    if tail.households_total is None:
        raise ValueError("survey tail needs households_total to merge")
    h_total = float(tail.households_total)
    r_count = len(rich)
    if rich.wealth[0] <= tail.wealth[-1]:
        raise Overlap(
            f"rich-list minimum {rich.wealth[0]:g} does not exceed the "
            f"survey maximum {tail.wealth[-1]:g}")
    keep = tail.exceedance >= r_count / h_total
    exceed_rich = (r_count - np.arange(1, r_count + 1)) / h_total
    # Tied rich wealth collapses to the last (lowest-exceedance) point.
    last = np.append(np.diff(rich.wealth) > 0.0, True)
    return EmpiricalTail(
        np.concatenate([tail.wealth[keep], rich.wealth[last]]),
        np.concatenate([tail.exceedance[keep], exceed_rich[last]]),
        households_total=tail.households_total)


# === rates of return =======================================================

def percentile_ror(tail_t: EmpiricalTail, tail_t2: EmpiricalTail,
                   savings: SavingsModel, period_years: float = 2.0
                   ) -> RorSeries:
    """Annualised return per integer percentile, net of savings.

    r_i = (w'_i - w_i - period * S(w_i)) / (period * w_i), where w_i and
    w'_i are the percentile-i wealth in the start and end tails.
    """
    if period_years <= 0.0:
        raise ValueError("period_years must be positive")
    pct = np.arange(1, 101)
    w = np.array([percentile_wealth(tail_t, (100 - i) / 100.0) for i in pct])
    w2 = np.array([percentile_wealth(tail_t2, (100 - i) / 100.0)
                   for i in pct])
    s = np.asarray(savings_eval(savings, w), dtype=float)
    if s.ndim == 0:
        s = np.full(pct.size, float(s))
    ror = (w2 - w - period_years * s) / (period_years * w)
    return RorSeries(percentile=pct, wealth=w, ror=ror, savings=s,
                     period_years=period_years)


def extract_alpha(wealth_or_series, wealth_next=None, *, gamma: float,
                  savings=0.0) -> np.ndarray:
    """Return coefficients alpha = (W' - W - S) / W**gamma.

    Accepts either a RorSeries (where the annualised return already nets
    out savings, so alpha = r * w**(1 - gamma)) or a pair of wealth arrays
    one step apart with an optional per-agent savings amount.
    """
    if isinstance(wealth_or_series, RorSeries):
        series = wealth_or_series
        return series.ror * series.wealth ** (1.0 - gamma)
    w = np.asarray(wealth_or_series, dtype=float)
    w2 = np.asarray(wealth_next, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("wealth must be positive")
    return (w2 - w - savings) / w**gamma


def _ror_points(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, RorSeries):
        return series.wealth, series.ror
    if isinstance(series, (tuple, list)) and len(series) and \
            isinstance(series[0], RorSeries):
        w = np.concatenate([s.wealth for s in series])
        r = np.concatenate([s.ror for s in series])
        return w, r
    w, r = series
    return np.asarray(w, dtype=float), np.asarray(r, dtype=float)


def select_gamma(was_series, rich_series,
                 interval: tuple[float, float] = (1.0, 1.5)
                 ) -> GammaSelection:
    """Exponent at which mean extracted alpha agrees across datasets.

    Scans the signed mean difference on a coarse grid; a sign change is
    bracketed and solved as a root, which survives much sharper crossings
    than minimising the absolute value would. Without a sign change the
    absolute mismatch is golden-section refined around the grid minimum;
    a flat objective returns the interval midpoint and a minimum pinned
    to a boundary sets the no_crossing flag instead of raising.
    """
    w1, r1 = _ror_points(was_series)
    w2, r2 = _ror_points(rich_series)
    if w1.size == 0 or w2.size == 0:
        raise EmptyInput("both datasets must be nonempty")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("search interval must have lo < hi")

    def signed(g: float) -> float:
        a1 = float(np.mean(r1 * w1 ** (1.0 - g)))
        a2 = float(np.mean(r2 * w2 ** (1.0 - g)))
        return a1 - a2

    grid = np.linspace(lo, hi, 33)
    vals = np.array([signed(g) for g in grid])
    if np.all(vals == 0.0):
        return GammaSelection(gamma=(lo + hi) / 2.0, mismatch=0.0,
                              no_crossing=False)
    for i in range(len(grid)):
        if vals[i] == 0.0:
            return GammaSelection(gamma=float(grid[i]), mismatch=0.0,
                                  no_crossing=False)
    flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if flips.size > 0:
        i = int(flips[0])
        g = float(optimize.brentq(signed, grid[i], grid[i + 1], xtol=1e-12))
        return GammaSelection(gamma=g, mismatch=abs(signed(g)),
                              no_crossing=False)
    best = int(np.argmin(np.abs(vals)))
    if best in (0, len(grid) - 1):
        return GammaSelection(gamma=float(grid[best]),
                              mismatch=float(abs(vals[best])),
                              no_crossing=True)
    res = optimize.minimize_scalar(
        lambda g: abs(signed(g)),
        bracket=(grid[best - 1], grid[best], grid[best + 1]),
        method="golden", options={"xtol": 1e-10})
    g = float(min(max(res.x, lo), hi))
    return GammaSelection(gamma=g, mismatch=abs(signed(g)),
                          no_crossing=False)


def fit_ror_power(series, gamma: float | None = None) -> PowerFitROR:
    """Power law for the mean return, r = mu * w**(gamma - 1).

    Free mode fits a least-squares line to (log w, log r) over positive
    returns; negative returns cannot enter a logarithm and are counted in
    n_excluded. Fixed-gamma mode averages alpha = r * w**(1 - gamma) over
    all points. Either way sigma is the standard deviation of the full
    alpha sample at the returned gamma.
    """
    w, r = _ror_points(series)
    if w.size < 3:
        raise InsufficientPoints(f"{w.size} ROR points; need at least 3")
    excluded = 0
    if gamma is None:
        pos = r > 0.0
        excluded = int((~pos).sum())
        if excluded == r.size:
            raise AllNonPositive("no positive returns to fit")
        if int(pos.sum()) < 3:
            raise InsufficientPoints(
                f"{int(pos.sum())} positive ROR points; need at least 3")
        slope, intercept = np.polyfit(np.log(w[pos]), np.log(r[pos]), 1)
        gamma = 1.0 + float(slope)
        mu = float(np.exp(intercept))
    else:
        mu = float(np.mean(r * w ** (1.0 - gamma)))
    alpha = r * w ** (1.0 - gamma)
    sigma = float(np.std(alpha, ddof=1)) if alpha.size > 1 else 0.0
    return PowerFitROR(mu=mu, gamma=float(gamma), sigma=sigma,
                       n_points=int(w.size), n_excluded=excluded)


def mean_variance_check(series, bin_edges=None) -> MeanVarianceResult:
    """Per-wealth-bin var(r)/mean(r)^2, which the model ties to the alpha
    law's own variance-to-squared-mean ratio at every scale.

    Bins with fewer than ten points are dropped; at least two must
    survive. The pooled ratio weights bins by their counts.
    """
    w, r = _ror_points(series)
    if bin_edges is None:
        bin_edges = np.geomspace(w.min(), w.max() * (1.0 + 1e-12), 9)
    bin_edges = np.asarray(bin_edges, dtype=float)
    which = np.digitize(w, bin_edges) - 1
    ratios, counts, edges_kept = [], [], []
    for b in range(bin_edges.size - 1):
        rb = r[which == b]
        if rb.size < 10:
            continue
        m = float(rb.mean())
        ratios.append(float(rb.var(ddof=1)) / m**2)
        counts.append(rb.size)
        edges_kept.append((bin_edges[b], bin_edges[b + 1]))
    if len(ratios) < 2:
        raise InsufficientBins(
            f"{len(ratios)} bins with >= 10 points; need at least 2")
    ratios = np.array(ratios)
    counts = np.array(counts)
    pooled = float(np.sum(ratios * counts) / np.sum(counts))
    return MeanVarianceResult(ratio=pooled, bin_ratios=ratios,
                              bin_counts=counts,
                              bin_edges=np.array(edges_kept))


# === savings calibration ===================================================

def fit_savings(wealth, net_savings, kappa1: float = 1.0e6) -> SavingsModel:
    """Least squares for S(w) = kappa1 / (1 + kappa2 * w**kappa3).

    The start comes from the exact linearisation log(kappa1/S - 1) =
    log(kappa2) + kappa3 * log(w) over rows with 0 < S < kappa1; rows
    outside that range still enter the refinement objective. Two points
    interpolate exactly. A non-negative fitted kappa3 cannot satisfy the
    model's shape and raises FitDidNotConverge.
    """
    w = np.asarray(wealth, dtype=float)
    s = np.asarray(net_savings, dtype=float)
    if w.size != s.size or w.size < 2:
        raise InsufficientPoints("need at least 2 (wealth, savings) pairs")
    if np.any(w <= 0.0):
        raise ValueError("wealth must be positive")
    if kappa1 <= 0.0:
        raise ValueError("kappa1 must be positive")
    usable = (s > 0.0) & (s < kappa1)
    if int(usable.sum()) < 2:
        raise FitDidNotConverge(
            "fewer than 2 rows with savings strictly between 0 and kappa1")
    k3_0, lk2_0 = np.polyfit(np.log(w[usable]),
                             np.log(kappa1 / s[usable] - 1.0), 1)

    def residuals(theta):
        lk2, k3 = theta
        return kappa1 / (1.0 + np.exp(lk2) * w**k3) - s

    theta = np.array([lk2_0, k3_0])
    if w.size > 2:
        starts = [theta, theta + (1.0, -0.3), theta + (-1.0, 0.3)]
        fits = [optimize.least_squares(residuals, t0, method="lm")
                for t0 in starts]
        theta = min(fits, key=lambda f: float(np.sum(f.fun**2))).x
    lk2, k3 = float(theta[0]), float(theta[1])
    # Constant-looking data drives kappa3 to the zero boundary, where the
    # logistic degenerates; treat anything this shallow as no fit.
    if k3 >= -1e-6:
        raise FitDidNotConverge(
            f"kappa3 fitted to {k3:g}; the model needs kappa3 < 0",
            best=None)
    return SavingsModel(kappa1=kappa1, kappa2=math.exp(lk2), kappa3=k3)
