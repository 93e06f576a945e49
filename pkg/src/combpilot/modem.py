"""Square-QAM modem: Gray mapping, hard decisions, BER bookkeeping.

Constellations are normalized to unit average symbol energy, so Es/N0
in dB converts to a total complex noise variance of 10**(-snr_db/10).
The analytic BER routine enumerates per-axis Gray-PAM decision regions
exactly (a finite sum of Gaussian tail terms) and backs the SNR
calibration used throughout the simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import erfc

SUPPORTED_ORDERS = (4, 16, 64)


def _gray_encode(n: NDArray[np.int64]) -> NDArray[np.int64]:
    return n ^ (n >> 1)


def _gray_decode(g: NDArray[np.int64]) -> NDArray[np.int64]:
    b = g.copy()
    shift = 1
    while (b >> shift).any():
        b ^= b >> shift
        shift *= 2
    return b


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped square QAM, points ordered by (I level, Q level)."""

    order: int
    points: NDArray[np.complex128]
    bit_labels: NDArray[np.uint8]  # (order, bits_per_symbol)
    # Per-axis machinery: ascending level values and the midpoints between
    # them. A received coordinate exactly on a midpoint decides to the lower
    # level, i.e. the smaller point index in the canonical ordering.
    levels: NDArray[np.float64] = field(repr=False)
    boundaries: NDArray[np.float64] = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def side(self) -> int:
        return int(round(math.sqrt(self.order)))

    def max_energy_point(self) -> complex:
        """Highest-energy point (first in canonical order on ties); used for pilots."""
        return complex(self.points[int(np.argmax(np.abs(self.points)))])


def make_constellation(order: int) -> Constellation:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(math.sqrt(order)))
    axis_bits = int(np.log2(side))
    # Odd-integer grid, then normalize to unit average energy: E = 2(M-1)/3.
    raw_levels = 2 * np.arange(side) - (side - 1)
    scale = 1.0 / math.sqrt(2.0 * (order - 1) / 3.0)
    levels = raw_levels * scale
    boundaries = (levels[:-1] + levels[1:]) / 2.0

    i_lev, q_lev = np.divmod(np.arange(order), side)
    points = levels[i_lev] + 1j * levels[q_lev]

    gray = _gray_encode(np.arange(side))
    labels = np.zeros((order, 2 * axis_bits), dtype=np.uint8)
    for b in range(axis_bits):
        bit = axis_bits - 1 - b  # MSB first within each half
        labels[:, b] = (gray[i_lev] >> bit) & 1
        labels[:, axis_bits + b] = (gray[q_lev] >> bit) & 1

    return Constellation(order=order, points=points, bit_labels=labels,
                         levels=levels, boundaries=boundaries)


def _bits_to_levels(bits: NDArray, axis_bits: int) -> NDArray[np.int64]:
    """Pack MSB-first bit columns into ints, then Gray-decode to level indices."""
    weights = 1 << np.arange(axis_bits - 1, -1, -1)
    return _gray_decode(bits.astype(np.int64) @ weights)


def map_bits(bits: NDArray, c: Constellation) -> NDArray[np.complex128]:
    """Map a flat bit sequence to symbols; first half of each group drives I."""
    bits = np.asarray(bits)
    bps = c.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    axis_bits = bps // 2
    i_lev = _bits_to_levels(groups[:, :axis_bits], axis_bits)
    q_lev = _bits_to_levels(groups[:, axis_bits:], axis_bits)
    return c.levels[i_lev] + 1j * c.levels[q_lev]


def demap_hard(y: NDArray, c: Constellation) -> NDArray[np.uint8]:
    """Minimum-distance hard decisions, returned as a flat bit sequence.

    Decisions factor per axis on the square grid. Exact midpoints fall to
    the lower level on each axis, which is the smaller canonical index.
    """
    y = np.asarray(y).ravel()
    i_lev = np.searchsorted(c.boundaries, y.real, side="left")
    q_lev = np.searchsorted(c.boundaries, y.imag, side="left")
    idx = i_lev * c.side + q_lev
    return c.bit_labels[idx].reshape(-1)


def qam_ber_analytic(order: int, esn0_db: float) -> float:
    """Exact BER of Gray-mapped square QAM over AWGN at the given Es/N0.

    Enumerates, for each transmitted PAM level and each bit of its Gray
    label, the Gaussian probability mass falling in decision cells whose
    label disagrees in that bit. Independent of the mapper/demapper code.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}")
    side = int(round(math.sqrt(order)))
    axis_bits = int(np.log2(side))
    scale = 1.0 / math.sqrt(2.0 * (order - 1) / 3.0)
    x = (2 * np.arange(side) - (side - 1)) * scale
    n0 = 10.0 ** (-esn0_db / 10.0)
    sigma = math.sqrt(n0 / 2.0)  # per-axis noise std

    # P(decide cell c | sent level l) via Gaussian tails; cells share the
    # midpoint boundaries used by the hard demapper.
    edges = np.concatenate(([-np.inf], (x[:-1] + x[1:]) / 2.0, [np.inf]))
    # P(v <= e | sent x) = Phi((e - x)/sigma) = 0.5 erfc((x - e)/(sigma sqrt2))
    below_hi = 0.5 * erfc((x[:, None] - edges[None, 1:]) / (sigma * math.sqrt(2.0)))
    below_lo = 0.5 * erfc((x[:, None] - edges[None, :-1]) / (sigma * math.sqrt(2.0)))
    p_cell = below_hi - below_lo  # (sent level, decided cell)

    gray = _gray_encode(np.arange(side))
    total = 0.0
    for bit in range(axis_bits):
        b = (gray >> bit) & 1
        differs = b[:, None] != b[None, :]
        total += float(np.sum(p_cell * differs))
    # Average over levels and bits; both axes are identical by symmetry.
    return total / (side * axis_bits)


def calibrate_snr(target_ber: float, order: int, *, lo_db: float = -10.0,
                  hi_db: float = 60.0, rel_tol: float = 1e-6) -> float:
    """Es/N0 in dB at which the analytic BER equals target_ber (bisection)."""
    if not 0.0 < target_ber < 0.5:
        raise ValueError(f"target_ber must be in (0, 0.5), got {target_ber}")
    if qam_ber_analytic(order, lo_db) < target_ber:
        raise ValueError("target BER above the analytic curve at the lower bracket")
    if qam_ber_analytic(order, hi_db) > target_ber:
        raise ValueError("target BER below the analytic curve at the upper bracket")
    lo, hi = lo_db, hi_db
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ber = qam_ber_analytic(order, mid)
        if abs(ber - target_ber) / target_ber < rel_tol:
            return mid
        if ber > target_ber:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("SNR bisection did not converge")


@dataclass
class BerReport:
    """Per-channel and aggregate bit-error accounting for one run."""

    bit_errors_per_channel: NDArray[np.int64]
    bits_counted_per_channel: NDArray[np.int64]
    ber_aggregate: float
    mean_est_error: float = float("nan")  # rad^2, filled by the harness


def count_errors(tx_bits: NDArray, rx_bits: NDArray, data_mask: NDArray) -> BerReport:
    """Count bit errors where data_mask is true; rows are channels."""
    tx_bits = np.asarray(tx_bits)
    rx_bits = np.asarray(rx_bits)
    data_mask = np.asarray(data_mask, dtype=bool)
    if tx_bits.shape != rx_bits.shape or tx_bits.shape != data_mask.shape:
        raise ValueError(
            f"shape mismatch: tx {tx_bits.shape}, rx {rx_bits.shape}, mask {data_mask.shape}"
        )
    if tx_bits.ndim == 1:
        tx_bits = tx_bits[None, :]
        rx_bits = rx_bits[None, :]
        data_mask = data_mask[None, :]
    errors = np.sum((tx_bits != rx_bits) & data_mask, axis=1).astype(np.int64)
    counted = np.sum(data_mask, axis=1).astype(np.int64)
    total_bits = int(counted.sum())
    ber = float(errors.sum() / total_bits) if total_bits else float("nan")
    return BerReport(bit_errors_per_channel=errors,
                     bits_counted_per_channel=counted,
                     ber_aggregate=ber)


def simulate_awgn_ber(order: int, esn0_db: float, n_symbols: int,
                      rng: np.random.Generator, chunk: int = 1 << 18) -> tuple[int, int]:
    """Monte Carlo (errors, bits) for the modem alone over AWGN, no phase noise."""
    c = make_constellation(order)
    bps = c.bits_per_symbol
    noise_var = 10.0 ** (-esn0_db / 10.0)
    scale = math.sqrt(noise_var / 2.0)
    errors = 0
    done = 0
    while done < n_symbols:
        n = min(chunk, n_symbols - done)
        bits = rng.integers(0, 2, size=n * bps, dtype=np.uint8)
        y = map_bits(bits, c)
        y = y + rng.normal(0.0, scale, n) + 1j * rng.normal(0.0, scale, n)
        errors += int(np.count_nonzero(demap_hard(y, c) != bits))
        done += n
    return errors, n_symbols * bps
