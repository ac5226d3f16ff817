"""Numerical checks of the model's limiting behaviour.

Three regimes are covered: the lognormal limit of the linear multiplicative
recursion W' = A*W + B in its growth phase, the power-law tail of its
stationary phase via the root of E[|A|**beta] = 1, and the gamma**n scaled
log-wealth limit of the non-linear recursion, whose existence makes the
super-exponential growth constant per trajectory well defined.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from nlkesten.distributions import NctParams, _nct_from_uniforms, sample_nct_many
from nlkesten.errors import EmptyInput, GammaIsOne, NoRoot, WrongRegime
from nlkesten.process import SimulationConfig, initial_wealth_at, savings_eval

Law = Callable[[np.random.Generator, int], np.ndarray]

_MOMENT_DRAWS = 1 << 20


# === law constructors ======================================================

def constant_law(value: float) -> Law:
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(value))
    return draw


def lognormal_law(mean_log: float, sd_log: float) -> Law:
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.exp(rng.normal(mean_log, sd_log, size))
    return draw


def two_point_law(values: tuple[float, float], p_first: float) -> Law:
    a, b = float(values[0]), float(values[1])
    if not 0.0 < p_first < 1.0:
        raise ValueError("p_first must lie strictly inside (0, 1)")

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < p_first, a, b)
    return draw


def nct_multiplier_law(params: NctParams, premultiplier: float = 1.0) -> Law:
    """A = 1 + premultiplier * alpha with alpha drawn from the given law."""
    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        alpha = _nct_from_uniforms(params, rng.random(size), rng.random(size))
        return 1.0 + premultiplier * alpha
    return draw


# === linear recursion ======================================================

@dataclass(frozen=True)
class LinearKestenSpec:
    """Multiplier and additive laws of W' = A*W + B.

    mu and nu2 are E[log|A|] and Var[log|A|]; leave them None to have them
    estimated from the law itself with a dedicated substream.
    """
    law_a: Law
    law_b: Law
    mu: float | None = None
    nu2: float | None = None

    def resolved_moments(self, rng: np.random.Generator) -> tuple[float, float]:
        if self.mu is not None and self.nu2 is not None:
            return float(self.mu), float(self.nu2)
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(self.law_a(rng, _MOMENT_DRAWS)))
        mu = float(np.mean(logs)) if self.mu is None else float(self.mu)
        nu2 = float(np.var(logs)) if self.nu2 is None else float(self.nu2)
        return mu, nu2


@dataclass(frozen=True)
class CltResult:
    standardized: np.ndarray
    ks_distance: float
    mu: float
    nu2: float


def simulate_linear(spec: LinearKestenSpec, n_steps: int, trajectories: int,
                    seed: int, w0: float = 1.0) -> np.ndarray:
    """Terminal W_n for independent trajectories, step-major draws."""
    if n_steps < 0 or trajectories < 1:
        raise ValueError("need n_steps >= 0 and at least one trajectory")
    rng = _substream(seed, 0)
    w = np.full(trajectories, float(w0))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            w = spec.law_a(rng, trajectories) * w \
                + spec.law_b(rng, trajectories)
    return w


def linear_clt_check(spec: LinearKestenSpec, n_steps: int, trajectories: int,
                     seed: int = 0) -> CltResult:
    """Standardise log|W_n| and measure its distance from a unit normal.

    In the growth phase log|W_n| is a random walk with drift mu and step
    variance nu2, so (log|W_n| - mu*n)/sqrt(n*nu2) tends to a standard
    normal across trajectories.
    """
    mu, nu2 = spec.resolved_moments(_substream(seed, 1))
    if mu <= 0.0:
        raise WrongRegime(
            f"E[log|A|] = {mu:g}; the growth phase needs it positive")
    # A constant law leaves rounding residue of order eps**2 in the
    # estimated variance rather than an exact zero.
    if nu2 <= 1e-24 * max(1.0, mu * mu):
        raise WrongRegime("Var[log|A|] = 0 makes the standardisation "
                          "degenerate")
    if n_steps < 1:
        raise ValueError("need at least one step")
    w = simulate_linear(spec, n_steps, trajectories, seed)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(w))
    z = (logs - mu * n_steps) / np.sqrt(n_steps * nu2)
    ks = float(stats.kstest(z, "norm").statistic)
    return CltResult(standardized=z, ks_distance=ks, mu=mu, nu2=nu2)


@dataclass(frozen=True)
class TailExponent:
    beta: float
    std_error: float
    n_draws: int


def stationary_tail_exponent(law_a: Law, seed: int = 0,
                             n_draws: int = 1_000_000,
                             beta_max: float = 64.0) -> TailExponent:
    """Root of E[|A|**beta] = 1 by Monte Carlo expectation and bracketing.

    One fixed sample of A serves every beta, making the moment curve
    smooth and the bisection deterministic. The standard error comes from
    the delta method: se(mean)/|d E[|A|**beta]/d beta| at the root.
    """
    rng = _substream(seed, 2)
    a = np.abs(np.asarray(law_a(rng, n_draws), dtype=float))
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
    mu = float(np.mean(log_a))
    if not mu < 0.0:
        raise WrongRegime(
            f"E[log|A|] = {mu:g}; the stationary phase needs it negative")

    def moment_gap(beta: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.mean(a**beta)) - 1.0

    hi = 1.0
    while moment_gap(hi) <= 0.0:
        hi *= 2.0
        if hi > beta_max:
            raise NoRoot(f"E[|A|**beta] stays below 1 up to beta = "
                         f"{beta_max:g}")
    beta = float(brentq(moment_gap, 1e-9, hi, xtol=1e-12))
    powered = a**beta
    slope = float(np.mean(powered * log_a))
    se = float(np.std(powered) / (np.sqrt(n_draws) * abs(slope)))
    return TailExponent(beta=beta, std_error=se, n_draws=n_draws)


# === non-linear recursion ==================================================

@dataclass(frozen=True)
class GrowthConstant:
    """Per-trajectory limit of the gamma**n scaled log wealth.

    estimate is W0 * exp(D) where D is the discounted sum of the log
    increments; scaled_log holds X_n / gamma**n for n = 0..depth.
    """
    estimate: float
    depth: int
    converged: bool
    scaled_log: np.ndarray


def _config_alpha(config: SimulationConfig, trajectory: int,
                  n_step: int) -> float:
    # Block-aligned single draw equal to what the population step hands
    # this agent, so log-domain trajectories track wealth-domain runs.
    lo = (trajectory // 4) * 4
    draws = sample_nct_many(config.alpha_law, config.master_seed,
                            trajectory - lo + 1, step=n_step, start=lo)
    return config.premultiplier * float(draws[-1])


def nonlinear_growth_constant(config: SimulationConfig, trajectory: int = 0,
                              n_steps: int = 500,
                              alpha_draws: float | np.ndarray | None = None
                              ) -> GrowthConstant:
    """Track X_n / gamma**n for one trajectory in the log domain.

    The recursion X' = gamma*X + log(alpha + W**(1-gamma) + S*W**(-gamma))
    reproduces the wealth update exactly while only ever exponentiating
    negative quantities, so no wealth-domain overflow can occur; once X
    saturates to inf both correction terms are zero anyway and the scaled
    series keeps accumulating log(alpha) increments correctly.

    alpha_draws may be a constant or a per-step array; by default each
    step's alpha comes from the config's law on this trajectory's stream.
    """
    if config.gamma <= 1.0:
        raise GammaIsOne("the scaled-log limit needs gamma > 1")
    if n_steps < 1:
        raise ValueError("need at least one step")
    gamma = config.gamma
    w0 = initial_wealth_at(config, trajectory)
    s = float(savings_eval(config.savings, w0))

    if alpha_draws is None:
        alpha_at = lambda k: _config_alpha(config, trajectory, k)
    elif np.isscalar(alpha_draws):
        alpha_at = lambda k: float(alpha_draws)
    else:
        draws = np.asarray(alpha_draws, dtype=float)
        if draws.size < n_steps:
            raise ValueError(f"{draws.size} alpha draws for {n_steps} steps")
        alpha_at = lambda k: float(draws[k])

    x = float(np.log(w0))
    scaled = np.empty(n_steps + 1)
    scaled[0] = x
    inv_gamma = 1.0 / gamma
    discount = 1.0
    for k in range(n_steps):
        alpha = alpha_at(k)
        with np.errstate(over="ignore"):
            arg = alpha + np.exp((1.0 - gamma) * x) + s * np.exp(-gamma * x)
        if not arg > 0.0:
            raise WrongRegime(
                f"log argument {arg:g} at step {k}; the growth phase needs "
                "alpha + W**(1-gamma) + S*W**(-gamma) > 0")
        b = float(np.log(arg))
        x = gamma * x + b
        discount *= inv_gamma
        scaled[k + 1] = scaled[k] + b * discount
    converged = abs(scaled[-1] - scaled[-2]) < 1e-9
    return GrowthConstant(estimate=float(np.exp(scaled[-1])), depth=n_steps,
                          converged=converged, scaled_log=scaled)


def write_growth_diagnostic(path: str | Path, result: GrowthConstant) -> None:
    """CSV of the scaled-log series, one row per step count."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "scaled_log_wealth"])
        for n, value in enumerate(result.scaled_log):
            writer.writerow([n, repr(float(value))])


def read_growth_diagnostic(path: str | Path) -> np.ndarray:
    """Scaled-log series back from its CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["n", "scaled_log_wealth"]:
            raise ValueError(f"{path}: expected header n,scaled_log_wealth")
        values = [float(row[1]) for row in reader]
    if not values:
        raise EmptyInput(f"{path}: no rows")
    return np.array(values)


# === return band ===========================================================

def ror_band(mu: float, sigma: float, gamma: float,
             w: float | np.ndarray) -> tuple[float | np.ndarray,
                                             float | np.ndarray]:
    """One standard deviation band of the return at wealth w."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("wealth must be positive")
    scale = w ** (gamma - 1.0)
    lo, hi = (mu - sigma) * scale, (mu + sigma) * scale
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def _substream(seed: int, stream: int) -> np.random.Generator:
    # Distinct child streams keep moment estimation, simulation and the
    # tail-exponent sample independent while staying seed-deterministic.
    children = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(children[stream])
