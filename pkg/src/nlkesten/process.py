"""Wealth process engine: W' = W + alpha * W**gamma + S, with bankruptcy
replacement and deterministic counter-addressed randomness.

Every random quantity is addressed by (master seed, agent, step, slot), so a
run is a pure function of its configuration. Thread-parallel execution only
changes how the agent axis is chunked; each agent's draws and arithmetic are
identical under any worker count, which keeps outputs byte-for-byte stable.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nlkesten import inequality
from nlkesten.distributions import NctParams, ParetoParams, sample_nct_many
from nlkesten.errors import (AllBankrupt, EmptyInput, GammaIsOne,
                             WealthOverflow)
from nlkesten.rng import (SLOT_DONOR, SLOT_INITIAL, SLOT_REPLACEMENT,
                          uniforms)
from nlkesten.tailstats import EmpiricalTail, empirical_tail

WEALTH_CEILING = 1.0e300

REPLACEMENT_MECHANISMS = ("R1", "R2", "R3")

# Agents per work unit; a multiple of the four counter words per block, so
# chunk boundaries always fall on stream-block edges.
_CHUNK = 1 << 16


@dataclass(frozen=True)
class SavingsModel:
    """Logistic propensity S(w) = kappa1 / (1 + kappa2 * w**kappa3).

    kappa1 is the saturation level in GBP per step, kappa2 the crossover
    coefficient and kappa3 the (negative) wealth exponent. The all-zero
    instance is the no-savings model.
    """

    kappa1: float = 0.0
    kappa2: float = 0.0
    kappa3: float = 0.0

    def __post_init__(self):
        if self.is_zero:
            return
        if self.kappa1 <= 0.0 or self.kappa2 <= 0.0:
            raise ValueError("kappa1 and kappa2 must be positive")
        if self.kappa3 >= 0.0:
            raise ValueError("kappa3 must be negative")

    @property
    def is_zero(self) -> bool:
        return self.kappa1 == 0.0 and self.kappa2 == 0.0 and self.kappa3 == 0.0

    @classmethod
    def zero(cls) -> "SavingsModel":
        return cls()


# Fitted to UK decile-level disposable income minus expenditure against
# median decile wealth.
UK_SAVINGS = SavingsModel(kappa1=1.0e6, kappa2=4.13e9, kappa3=-1.308)


def savings_eval(model: SavingsModel, wealth) -> np.ndarray | float:
    """S(w); wealth must be positive."""
    w = np.asarray(wealth, dtype=float)
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("wealth must be positive and finite")
    if model.is_zero:
        return np.zeros_like(w) if w.ndim else 0.0
    out = model.kappa1 / (1.0 + model.kappa2 * w**model.kappa3)
    return out if w.ndim else float(out)


# === initial conditions ====================================================

@dataclass(frozen=True)
class Constant:
    """Every agent starts at the same wealth."""

    w0: float = 1.0e4

    def __post_init__(self):
        if not (math.isfinite(self.w0) and self.w0 > 0.0):
            raise ValueError("w0 must be positive and finite")


@dataclass(frozen=True)
class ShiftedExp:
    """floor plus an exponential with the given mean."""

    floor: float = 5.0e3
    mean: float = 5.0e3

    def __post_init__(self):
        if self.floor <= 0.0 or self.mean <= 0.0:
            raise ValueError("floor and mean must be positive")


@dataclass(frozen=True)
class Exp:
    """Exponential initial wealth with the given mean."""

    mean: float = 1.0e4

    def __post_init__(self):
        if self.mean <= 0.0:
            raise ValueError("mean must be positive")


@dataclass(frozen=True)
class Bootstrap:
    """Resample initial wealth from an empirical tail by inverse transform."""

    tail: EmpiricalTail


InitialCondition = Constant | ShiftedExp | Exp | ParetoParams | Bootstrap


# === configuration =========================================================

@dataclass(frozen=True)
class SimulationConfig:
    gamma: float
    alpha_law: NctParams
    premultiplier: float = 1.0
    savings: SavingsModel = field(default_factory=SavingsModel.zero)
    replacement: str = "R1"
    initial: InitialCondition = field(default_factory=Constant)
    n_agents: int = 100_000
    horizon: int = 0
    master_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 1.0):
            raise ValueError("gamma must be finite and >= 1")
        if not (math.isfinite(self.premultiplier) and self.premultiplier > 0.0):
            raise ValueError("premultiplier must be positive")
        if self.replacement not in REPLACEMENT_MECHANISMS:
            raise ValueError(
                f"replacement must be one of {REPLACEMENT_MECHANISMS}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")


def _initial_to_dict(initial: InitialCondition) -> dict:
    if isinstance(initial, Constant):
        return {"kind": "constant", "w0": initial.w0}
    if isinstance(initial, ShiftedExp):
        return {"kind": "shifted_exp", "floor": initial.floor,
                "mean": initial.mean}
    if isinstance(initial, Exp):
        return {"kind": "exp", "mean": initial.mean}
    if isinstance(initial, ParetoParams):
        return {"kind": "pareto", "x_m": initial.x_m, "beta": initial.beta}
    if isinstance(initial, Bootstrap):
        t = initial.tail
        return {"kind": "bootstrap", "wealth": [float(v) for v in t.wealth],
                "exceedance": [float(v) for v in t.exceedance],
                "households_total": t.households_total}
    raise TypeError(f"unknown initial condition {initial!r}")


def _initial_from_dict(d: dict, base_dir: Path | None = None
                       ) -> InitialCondition:
    kind = d.get("kind")
    if kind == "constant":
        return Constant(w0=float(d["w0"]))
    if kind == "shifted_exp":
        return ShiftedExp(floor=float(d["floor"]), mean=float(d["mean"]))
    if kind == "exp":
        return Exp(mean=float(d["mean"]))
    if kind == "pareto":
        return ParetoParams(x_m=float(d["x_m"]), beta=float(d["beta"]))
    if kind == "bootstrap":
        if "path" in d:
            from nlkesten.tailstats import read_tail_csv
            path = Path(d["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            total = d.get("households_total")
            tail = read_tail_csv(path,
                                 households_total=None if total is None
                                 else int(total))
        else:
            total = d.get("households_total")
            tail = EmpiricalTail(np.array(d["wealth"], dtype=float),
                                 np.array(d["exceedance"], dtype=float),
                                 households_total=None if total is None
                                 else int(total))
        return Bootstrap(tail)
    raise ValueError(f"unknown initial condition kind {kind!r}")


def config_to_dict(config: SimulationConfig) -> dict:
    law = config.alpha_law
    sav = config.savings
    return {
        "gamma": config.gamma,
        "alpha_law": {"k": law.k, "c": law.c, "l": law.l, "s": law.s},
        "premultiplier": config.premultiplier,
        "savings": (None if sav.is_zero
                    else {"kappa1": sav.kappa1, "kappa2": sav.kappa2,
                          "kappa3": sav.kappa3}),
        "replacement": config.replacement,
        "initial": _initial_to_dict(config.initial),
        "n_agents": config.n_agents,
        "horizon": config.horizon,
        "master_seed": config.master_seed,
    }


def config_from_dict(d: dict, base_dir: Path | None = None
                     ) -> SimulationConfig:
    law = d["alpha_law"]
    sav = d.get("savings")
    return SimulationConfig(
        gamma=float(d["gamma"]),
        alpha_law=NctParams(k=float(law["k"]), c=float(law["c"]),
                            l=float(law["l"]), s=float(law["s"])),
        premultiplier=float(d.get("premultiplier", 1.0)),
        savings=(SavingsModel.zero() if sav is None
                 else SavingsModel(kappa1=float(sav["kappa1"]),
                                   kappa2=float(sav["kappa2"]),
                                   kappa3=float(sav["kappa3"]))),
        replacement=str(d.get("replacement", "R1")),
        initial=_initial_from_dict(d["initial"], base_dir=base_dir),
        n_agents=int(d.get("n_agents", 100_000)),
        horizon=int(d.get("horizon", 0)),
        master_seed=int(d.get("master_seed", 0)),
    )


def config_digest(config: SimulationConfig) -> str:
    """Stable sha256 over the canonical JSON form of the configuration."""
    blob = json.dumps(config_to_dict(config), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# === population state ======================================================

@dataclass
class Population:
    """Mutable per-agent state advanced in place by step/apply_replacement.

    savings holds S frozen at each agent's initial wealth (0.0 for the
    no-savings model); flagged carries bankruptcy marks from step to
    apply_replacement within one iteration.
    """

    wealth: np.ndarray
    prev_wealth: np.ndarray
    bankruptcies: np.ndarray
    step: int
    savings: np.ndarray | float = 0.0
    flagged: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return int(self.wealth.size)

    @property
    def total_bankruptcies(self) -> int:
        return int(self.bankruptcies.sum())


def _initial_transform(initial: InitialCondition, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from addressed uniforms to starting wealth."""
    if isinstance(initial, ShiftedExp):
        return initial.floor - initial.mean * np.log1p(-u)
    if isinstance(initial, Exp):
        wealth = -initial.mean * np.log1p(-u)
        # u == 0 maps to zero wealth; nudge to the smallest positive
        # quantile so the positivity invariant holds.
        np.maximum(wealth, initial.mean * 2.0**-53, out=wealth)
        return wealth
    if isinstance(initial, ParetoParams):
        return initial.x_m * (1.0 - u) ** (-1.0 / initial.beta)
    if isinstance(initial, Bootstrap):
        tail = initial.tail
        cdf = 1.0 - tail.exceedance
        idx = np.searchsorted(cdf, u, side="right")
        return tail.wealth[np.minimum(idx, len(tail) - 1)]
    raise TypeError(f"unknown initial condition {initial!r}")


def initial_wealth_at(config: SimulationConfig, agent: int) -> float:
    """Starting wealth of one agent, equal to sample_initial's entry."""
    if not 0 <= agent < config.n_agents:
        raise ValueError(f"agent {agent} outside 0..{config.n_agents - 1}")
    if isinstance(config.initial, Constant):
        return float(config.initial.w0)
    lo = (agent // 4) * 4
    u = uniforms(config.master_seed, 0, SLOT_INITIAL, agent - lo + 1,
                 start=lo)
    return float(_initial_transform(config.initial, u[-1:])[0])


def sample_initial(config: SimulationConfig) -> Population:
    """Draw the step-0 population; one addressed uniform per agent."""
    n = config.n_agents
    initial = config.initial
    if isinstance(initial, Constant):
        wealth = np.full(n, float(initial.w0))
    else:
        wealth = _initial_transform(
            initial, uniforms(config.master_seed, 0, SLOT_INITIAL, n))
    return Population(
        wealth=wealth,
        prev_wealth=wealth.copy(),
        bankruptcies=np.zeros(n, dtype=np.int64),
        step=0,
        savings=savings_eval(config.savings, wealth),
    )


# === dynamics ==============================================================

def _chunk_bounds(n: int):
    # The same bounds under every worker count, so each ufunc sees the same
    # array slices and per-element results cannot depend on threading.
    for lo in range(0, n, _CHUNK):
        yield lo, min(lo + _CHUNK, n)


def wealth_update(wealth, alpha, gamma: float, savings=0.0):
    """Pure one-step map W + alpha * W**gamma + savings."""
    w = np.asarray(wealth, dtype=float)
    wg = w if gamma == 1.0 else w**gamma
    out = w + np.asarray(alpha, dtype=float) * wg + savings
    return float(out) if out.ndim == 0 else out


def _advance_chunk(config: SimulationConfig, w, sav, out, n_step, lo, hi):
    alpha = config.premultiplier * sample_nct_many(
        config.alpha_law, config.master_seed, hi - lo, step=n_step, start=lo)
    with np.errstate(over="ignore", invalid="ignore"):
        out[lo:hi] = wealth_update(w[lo:hi], alpha, config.gamma,
                                   sav if np.isscalar(sav) else sav[lo:hi])


def step(pop: Population, config: SimulationConfig, n_step: int | None = None,
         threads: int = 1) -> Population:
    """Advance one step in place: draw alpha, update wealth, flag W' <= 0.

    Draws are addressed by the step index, which defaults to the
    population's own counter. Raises WealthOverflow when any wealth exceeds
    the ceiling or stops being a number.
    """
    if n_step is None:
        n_step = pop.step
    n = pop.n_agents
    out = np.empty_like(pop.wealth)
    bounds = list(_chunk_bounds(n))
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            jobs = [pool.submit(_advance_chunk, config, pop.wealth,
                                pop.savings, out, n_step, lo, hi)
                    for lo, hi in bounds]
            for job in jobs:
                job.result()
    else:
        for lo, hi in bounds:
            _advance_chunk(config, pop.wealth, pop.savings, out, n_step,
                           lo, hi)
    bad = (out > WEALTH_CEILING) | np.isnan(out)
    if np.any(bad):
        agent = int(np.argmax(bad))
        raise WealthOverflow(step=n_step, agent=agent,
                             ceiling=WEALTH_CEILING)
    pop.prev_wealth = pop.wealth
    pop.wealth = out
    pop.flagged = out <= 0.0
    pop.step = n_step + 1
    return pop


def apply_replacement(pop: Population, config: SimulationConfig) -> Population:
    """Replace agents flagged by the last step and count the events.

    R1 restarts a bankrupt agent at a uniform (0, 1] fraction of its
    pre-step wealth, R2 at exactly its pre-step wealth, R3 at the post-step
    wealth of a uniformly chosen solvent agent. Draws come from the full
    agent-indexed vectors so the stream layout does not depend on how many
    agents went bankrupt.
    """
    flagged = pop.flagged
    if flagged is None:
        return pop
    pop.flagged = None
    if not flagged.any():
        return pop
    n_step = pop.step - 1
    n = pop.n_agents
    if config.replacement == "R1":
        u = uniforms(config.master_seed, n_step, SLOT_REPLACEMENT, n)
        pop.wealth[flagged] = (1.0 - u[flagged]) * pop.prev_wealth[flagged]
    elif config.replacement == "R2":
        pop.wealth[flagged] = pop.prev_wealth[flagged]
    else:
        donors = pop.wealth[~flagged]
        if donors.size == 0:
            raise AllBankrupt(f"no solvent donor at step {n_step}")
        u = uniforms(config.master_seed, n_step, SLOT_DONOR, n)
        pick = (u[flagged] * donors.size).astype(np.int64)
        pop.wealth[flagged] = donors[pick]
    pop.bankruptcies[flagged] += 1
    return pop


# === orchestration =========================================================

@dataclass(frozen=True)
class Snapshot:
    """Population summary emitted at an observation time."""

    step: int
    tail: EmpiricalTail
    gini: float
    top_share: float
    bankruptcies_total: int
    wealth_mean: float
    wealth_max: float


@dataclass(frozen=True)
class RunResult:
    snapshots: tuple[Snapshot, ...]
    series: np.ndarray
    population: Population


GENERIC_OBSERVATION_TIMES = (0, 10, 100, 200, 300)
SAVINGS_OBSERVATION_TIMES = (0, 2, 4, 6, 8, 10, 20, 50)

SERIES_COLUMNS = ("step", "gini", "top_share", "bankruptcies")
_TOP_SHARE_Q = 0.01


def default_observation_times(config: SimulationConfig) -> tuple[int, ...]:
    base = (GENERIC_OBSERVATION_TIMES if config.savings.is_zero
            else SAVINGS_OBSERVATION_TIMES)
    return tuple(t for t in base if t <= config.horizon)


def _snapshot(pop: Population) -> Snapshot:
    rep = inequality.report(pop.wealth, q=_TOP_SHARE_Q)
    return Snapshot(step=pop.step, tail=empirical_tail(pop.wealth),
                    gini=rep.gini, top_share=rep.top_share,
                    bankruptcies_total=pop.total_bankruptcies,
                    wealth_mean=float(pop.wealth.mean()),
                    wealth_max=float(pop.wealth.max()))


def run(config: SimulationConfig, observer=None, observation_times=None,
        threads: int = 1) -> RunResult:
    """Run the configured process to its horizon.

    Returns snapshots at the observation times, a per-step series of
    (step, gini, top 1% share, bankruptcies so far), and the final
    population. The observer, when given, is called with each Snapshot as
    it is produced.
    """
    if observation_times is None:
        observation_times = default_observation_times(config)
    obs = set(int(t) for t in observation_times)
    pop = sample_initial(config)
    snapshots = []
    series = np.empty((config.horizon + 1, 4))

    def record(n):
        rep = inequality.report(pop.wealth, q=_TOP_SHARE_Q)
        series[n] = (n, rep.gini, rep.top_share, pop.total_bankruptcies)
        if n in obs:
            snap = _snapshot(pop)
            snapshots.append(snap)
            if observer is not None:
                observer(snap)

    record(0)
    for n in range(config.horizon):
        step(pop, config, threads=threads)
        apply_replacement(pop, config)
        record(n + 1)
    return RunResult(snapshots=tuple(snapshots), series=series,
                     population=pop)


def crossover_scale(alpha: float, gamma: float) -> float:
    """Wealth at which the multiplicative gain alpha * W**(gamma-1) is one."""
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError("alpha must be positive and finite")
    if gamma < 1.0 or not math.isfinite(gamma):
        raise ValueError("gamma must be finite and >= 1")
    if gamma == 1.0:
        raise GammaIsOne("the crossover scale diverges as gamma -> 1")
    return alpha ** (-1.0 / (gamma - 1.0))


# === checkpoints ===========================================================

def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def save_checkpoint(pop: Population, config: SimulationConfig, path) -> None:
    """One wealth value per line at full precision, plus a JSON sidecar with
    the step, seed, configuration digest and bankruptcy total."""
    path = Path(path)
    with open(path, "w") as fh:
        for w in pop.wealth:
            fh.write(repr(float(w)))
            fh.write("\n")
    meta = {
        "step": pop.step,
        "master_seed": config.master_seed,
        "config_sha256": config_digest(config),
        "bankruptcies_total": pop.total_bankruptcies,
        "n_agents": pop.n_agents,
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Population, dict]:
    """Rebuild a population from a checkpoint.

    Per-agent bankruptcy counters are summarised, not stored, so they come
    back zeroed; the total lives in the returned metadata.
    """
    path = Path(path)
    with open(path) as fh:
        values = [float(line) for line in fh if line.strip()]
    if not values:
        raise EmptyInput(f"{path.name}: checkpoint has no wealth values")
    with open(_sidecar_path(path)) as fh:
        meta = json.load(fh)
    wealth = np.array(values)
    pop = Population(wealth=wealth, prev_wealth=wealth.copy(),
                     bankruptcies=np.zeros(wealth.size, dtype=np.int64),
                     step=int(meta["step"]))
    return pop, meta
