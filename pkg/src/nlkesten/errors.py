"""Exception hierarchy for the wealth-process toolkit.

Two families matter to callers: `InputError` covers malformed or degenerate
inputs (CLI exit code 2), `NumericError` covers regime and convergence
failures discovered during computation (CLI exit code 3).
"""
from __future__ import annotations


class KestenError(Exception):
    """Base class for all package errors."""


class InputError(KestenError):
    """Bad or degenerate input data."""


class NumericError(KestenError):
    """Numeric, regime, or convergence failure."""


# --- input family ---------------------------------------------------------

class EmptyInput(InputError):
    """An operation received an empty sample or vector."""


class EmptyTail(InputError):
    """Bootstrap source tail has no points."""


class ZeroVariance(InputError):
    """Sample is constant where spread is required."""


class InsufficientPoints(InputError):
    """Too few points inside the fit window."""


class InsufficientBins(InputError):
    """Too few populated wealth bins for a grouped statistic."""


class MissingPercentile(InputError):
    """A percentile cannot be extracted from one of the input tails."""


class NonMonotoneWealth(InputError):
    """Bucket wealth decreases where the source must be ordered by wealth."""


class ZeroBucket(InputError):
    """A Lorenz bucket contains no households."""


class Overlap(InputError):
    """Rich-list wealth does not lie strictly above the survey tail."""


class AllNonPositive(InputError):
    """No positive values remain after filtering for a log-scale fit."""


class MissingArtifact(InputError):
    """A required file is absent from the run directory."""


# --- numeric family -------------------------------------------------------

class FitDidNotConverge(NumericError):
    """Optimizer exhausted its budget; carries the best parameters seen."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class WrongRegime(NumericError):
    """Operation invoked outside its asymptotic regime (e.g. mu <= 0)."""


class NoRoot(NumericError):
    """Moment function never crosses 1 on the search range."""


class GammaIsOne(NumericError):
    """Crossover scale is undefined in the linear case."""


class WealthOverflow(NumericError):
    """A wealth value exceeded the numeric ceiling.

    Carries the step index and the offending agent index so callers can
    report where the super-exponential regime escaped double range.
    """

    def __init__(self, step: int, agent: int, ceiling: float):
        super().__init__(
            f"wealth exceeded {ceiling:.3g} at step {step}, agent {agent}"
        )
        self.step = step
        self.agent = agent
        self.ceiling = ceiling


class AllBankrupt(NumericError):
    """Replacement needs a donor but every agent is flagged."""
