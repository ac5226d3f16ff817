"""Counter-based random streams addressed by (master seed, agent, step).

Every uniform draw in the package is a pure function of the master seed, the
agent index, the step index, and a small slot number that separates the
different uses within one step (normal draw, chi-square draw, replacement
fraction, donor choice, initial condition). Identical addresses give
identical values on any platform and under any thread count, which is what
makes simulation output byte-reproducible regardless of how the agent axis
is chunked.

The construction uses the Philox 4x64 counter-based generator. One Philox
block yields four 64-bit words; agent ``i`` reads word ``i % 4`` of the block
at counter ``(i // 4, step, slot, 0)``. Vectorised generation therefore must
start at an agent index divisible by four so chunk output matches the
equivalent slice of a full-population vector bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

# Mixed into the second key word for domain separation from other Philox use.
_DOMAIN = 0x9E3779B97F4A7C15

_BLOCK = 4  # words per Philox block

# Slot assignments. Keeping them here makes collisions impossible to write.
SLOT_NORMAL = 0
SLOT_CHI2 = 1
SLOT_REPLACEMENT = 2
SLOT_DONOR = 3
SLOT_INITIAL = 4
SLOT_FIT = 5


def _check_seed(master_seed: int) -> None:
    if not (0 <= int(master_seed) < 2**64):
        raise ValueError("master_seed must fit in an unsigned 64-bit integer")


def uniforms(master_seed: int, step: int, slot: int, n: int,
             start: int = 0) -> np.ndarray:
    """Uniforms in [0, 1) for agents ``start .. start + n - 1``.

    Parameters
    ----------
    master_seed : int
        Run-level seed, unsigned 64-bit.
    step : int
        Step index (time) of the draw.
    slot : int
        Use-separation slot, one of the ``SLOT_*`` constants.
    n : int
        Number of agents to draw for.
    start : int
        First agent index; must be a multiple of 4 so that chunked and
        whole-population generation agree exactly.
    """
    _check_seed(master_seed)
    if start % _BLOCK:
        raise ValueError("start must be a multiple of 4 (Philox block size)")
    if n < 0:
        raise ValueError("n must be non-negative")
    bg = Philox(counter=[start // _BLOCK, step, slot, 0],
                key=[master_seed, _DOMAIN])
    return Generator(bg).random(n)


def stream_uniform(master_seed: int, agent: int, step: int, slot: int) -> float:
    """Single uniform for one (agent, step, slot) address.

    Equals ``uniforms(master_seed, step, slot, n)[agent]`` for any ``n`` large
    enough to cover the agent; the scalar path reads the same Philox word.
    """
    _check_seed(master_seed)
    if agent < 0:
        raise ValueError("agent index must be non-negative")
    bg = Philox(counter=[agent // _BLOCK, step, slot, 0],
                key=[master_seed, _DOMAIN])
    raw = bg.random_raw(_BLOCK)[agent % _BLOCK]
    return float((int(raw) >> 11) * 2.0**-53)


@dataclass(frozen=True)
class RngStream:
    """Addressable stream for one agent at one step.

    ``stream_id`` is the (agent index, step index) pair. Two streams with the
    same master seed and id always produce the same draws; distinct ids give
    independent draws.
    """

    master_seed: int
    stream_id: tuple[int, int]

    def uniform(self, slot: int = 0) -> float:
        agent, step = self.stream_id
        return stream_uniform(self.master_seed, agent, step, slot)

    def uniform_run(self, slot: int, n: int) -> np.ndarray:
        """``n`` uniforms for consecutive agents starting at this stream's.

        The starting agent index must be a multiple of 4.
        """
        agent, step = self.stream_id
        return uniforms(self.master_seed, step, slot, n, start=agent)
