"""Pilot placement schemes.

Two layouts are supported. Reference-aligned (RAT) puts pilots in the
designated reference channels only, all at the same periodic time slots.
Wrapped-diagonal (WDT) cycles a single pilot per pilot slot through all
channels. Both quantize the requested pilot rate onto the time grid via
the slot spacing; the first slot (k = 0) always carries pilots so the
acquisition transient is bounded deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import SystemParams
from .optimizer import ReferenceSet

RAT = "rat"
WDT = "wdt"


class PilotRateError(ValueError):
    """Requested pilot rate is not achievable by the scheme."""


@dataclass(frozen=True)
class PilotPattern:
    """Boolean pilot mask (true = pilot) plus scheme metadata."""

    kind: str
    mask: NDArray[np.bool_]  # L x N
    time_spacing: int
    pilot_symbol: complex
    reference_set: ReferenceSet | None = None

    @property
    def data_mask(self) -> NDArray[np.bool_]:
        return ~self.mask

    def pilot_fraction(self) -> float:
        return float(self.mask.mean())


def _spacing(ratio: float) -> int:
    return max(1, round(ratio))


def make_rat(params: SystemParams, dset: ReferenceSet, pilot_symbol: complex) -> PilotPattern:
    """Pilots at times 0, s, 2s, ... in every reference channel."""
    L, n = params.n_channels, params.n_symbols
    d = dset.d
    if dset.n_channels != L:
        raise ValueError(f"reference set built for L={dset.n_channels}, params have L={L}")
    bound = d / L
    if params.pilot_rate > bound:
        raise PilotRateError(
            f"pilot_rate {params.pilot_rate} exceeds D/L = {d}/{L} = {bound:.6g} "
            f"achievable by reference-aligned placement"
        )
    s = _spacing(d / (params.pilot_rate * L))
    mask = np.zeros((L, n), dtype=bool)
    for idx in dset.indices:
        mask[idx + params.m_max, ::s] = True
    return PilotPattern(kind=RAT, mask=mask, time_spacing=s,
                        pilot_symbol=pilot_symbol, reference_set=dset)


def make_wdt(params: SystemParams, pilot_symbol: complex) -> PilotPattern:
    """One pilot per pilot slot, cycling rows -M, -M+1, ..., M, -M, ..."""
    L, n = params.n_channels, params.n_symbols
    bound = 1.0 / L
    if params.pilot_rate > bound:
        raise PilotRateError(
            f"pilot_rate {params.pilot_rate} exceeds 1/L = {bound:.6g} "
            f"achievable by wrapped-diagonal placement"
        )
    s = _spacing(1.0 / (params.pilot_rate * L))
    mask = np.zeros((L, n), dtype=bool)
    slots = np.arange(0, n, s)
    rows = np.arange(len(slots)) % L
    mask[rows, slots] = True
    return PilotPattern(kind=WDT, mask=mask, time_spacing=s, pilot_symbol=pilot_symbol)


def pattern_to_text(pattern: PilotPattern) -> str:
    """Bitmap dump, one row per channel, '1' marking pilots."""
    return "\n".join("".join("1" if b else "0" for b in row) for row in pattern.mask)
