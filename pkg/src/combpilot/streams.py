"""Seed-derived random streams.

Every stochastic ingredient of a trial (data bits, phase walks, additive
noise) pulls from its own generator, derived from the experiment seed plus
an integer key path. Streams with the same key path are identical, which
is what makes paired comparisons (common random numbers across schemes)
and byte-reproducible sweeps possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Purpose slots within one trial. Keep these stable: changing them changes
# every simulated number downstream of a given seed.
PURPOSE_DATA = 0
PURPOSE_PHASE = 1
PURPOSE_NOISE = 2


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for (seed, *key). Key parts must be non-negative ints."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if any(k < 0 for k in key):
        raise ValueError("stream key parts must be non-negative")
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


@dataclass(frozen=True)
class TrialStreams:
    """The three independent generators one trial consumes."""

    data: np.random.Generator
    phase: np.random.Generator
    noise: np.random.Generator


def trial_streams(seed: int, sweep_index: int, trial_index: int) -> TrialStreams:
    """Streams for one (sweep point, trial) cell.

    The scheme under test is deliberately not part of the key: schemes
    compared at the same cell see identical bits, phase walks and noise.
    """
    return TrialStreams(
        data=derive_rng(seed, sweep_index, trial_index, PURPOSE_DATA),
        phase=derive_rng(seed, sweep_index, trial_index, PURPOSE_PHASE),
        noise=derive_rng(seed, sweep_index, trial_index, PURPOSE_NOISE),
    )
