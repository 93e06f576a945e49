"""Multichannel comb transmission model.

All comb lines share two phase-noise sources: a CW laser walk common to
every channel and an RF oscillator walk scaled by the channel index, so
channel m at time k carries the phase theta_c[k] + m * theta_r[k].
Channels are indexed m in {-M, ..., M} with M = (L - 1) // 2 and stored
as rows m + M of an L x N grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap angle(s) to [-pi, pi)."""
    return np.mod(x + np.pi, TWO_PI) - np.pi


@dataclass(frozen=True)
class SystemParams:
    """Full parameterization of one transmission block.

    snr_db is Es/N0 per symbol per channel with Es = 1; the matching
    total complex noise variance is ``noise_variance()``.
    """

    n_channels: int
    delta_nu_c: float  # CW laser linewidth, Hz
    delta_nu_r: float  # RF oscillator linewidth, Hz
    symbol_rate: float  # baud
    snr_db: float
    n_symbols: int
    pilot_rate: float
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 3 or self.n_channels % 2 == 0:
            raise ValueError(f"n_channels must be odd and >= 3, got {self.n_channels}")
        if self.delta_nu_c < 0 or self.delta_nu_r < 0:
            raise ValueError("linewidths must be non-negative")
        if self.symbol_rate <= 0:
            raise ValueError("symbol_rate must be positive")
        if self.n_symbols < 2:
            raise ValueError("n_symbols must be >= 2")
        if not 0 < self.pilot_rate <= 1:
            raise ValueError(f"pilot_rate must be in (0, 1], got {self.pilot_rate}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def m_max(self) -> int:
        """Largest channel index M; channels run -M ... M."""
        return (self.n_channels - 1) // 2

    @property
    def symbol_period(self) -> float:
        return 1.0 / self.symbol_rate

    @property
    def sigma2_c(self) -> float:
        """Per-step variance of the CW laser phase increments, rad^2."""
        return TWO_PI * self.delta_nu_c * self.symbol_period

    @property
    def sigma2_r(self) -> float:
        """Per-step variance of the RF oscillator phase increments, rad^2."""
        return TWO_PI * self.delta_nu_r * self.symbol_period

    def noise_variance(self) -> float:
        """Total complex AWGN variance (both quadratures together) for Es = 1."""
        return 10.0 ** (-self.snr_db / 10.0)

    def channel_indices(self) -> NDArray[np.int64]:
        return np.arange(-self.m_max, self.m_max + 1)


@dataclass(frozen=True)
class PhaseTrace:
    """The two source random walks over one block, unwrapped (cumulative)."""

    theta_c: NDArray[np.float64]
    theta_r: NDArray[np.float64]

    def __post_init__(self):
        if self.theta_c.shape != self.theta_r.shape or self.theta_c.ndim != 1:
            raise ValueError("theta_c and theta_r must be 1-D arrays of equal length")


def gen_phase_trace(params: SystemParams, rng: np.random.Generator) -> PhaseTrace:
    """Draw the two Gaussian random walks for one block.

    Initial phases are uniform on [-pi, pi); increments are zero-mean
    Gaussians with per-step variances sigma2_c and sigma2_r.
    """
    n = params.n_symbols
    walks = []
    for sigma2 in (params.sigma2_c, params.sigma2_r):
        theta0 = rng.uniform(-np.pi, np.pi)
        steps = rng.normal(0.0, np.sqrt(sigma2), size=n - 1)
        theta = np.empty(n)
        theta[0] = theta0
        np.cumsum(steps, out=theta[1:])
        theta[1:] += theta0
        walks.append(theta)
    return PhaseTrace(theta_c=walks[0], theta_r=walks[1])


def channel_phase(params: SystemParams, trace: PhaseTrace, m: int, k: int) -> float:
    """Total phase of channel m at time k: theta_c[k] + m * theta_r[k], unwrapped."""
    if abs(m) > params.m_max:
        raise ValueError(f"channel index {m} outside [-{params.m_max}, {params.m_max}]")
    if not 0 <= k < len(trace.theta_c):
        raise ValueError(f"time index {k} outside [0, {len(trace.theta_c)})")
    return float(trace.theta_c[k] + m * trace.theta_r[k])


def phase_grid(params: SystemParams, trace: PhaseTrace) -> NDArray[np.float64]:
    """L x N grid of total channel phases, row m + M for channel m."""
    m = params.channel_indices()[:, None]
    return trace.theta_c[None, :] + m * trace.theta_r[None, :]


def mixing_matrix(n_channels: int) -> NDArray[np.float64]:
    """L x 2 matrix T with row m + M equal to [1, m]; phase vector = T @ [theta_c, theta_r]."""
    if n_channels < 3 or n_channels % 2 == 0:
        raise ValueError(f"n_channels must be odd and >= 3, got {n_channels}")
    m_max = (n_channels - 1) // 2
    t = np.empty((n_channels, 2))
    t[:, 0] = 1.0
    t[:, 1] = np.arange(-m_max, m_max + 1)
    return t


def apply_channel(
    tx: NDArray[np.complexfloating],
    params: SystemParams,
    trace: PhaseTrace,
    noise_var: float,
    rng: np.random.Generator,
) -> NDArray[np.complex128]:
    """Rotate (signal + noise) by the per-channel phase: y = exp(j*theta) * (x + z).

    noise_var is the total variance of the circular complex Gaussian z,
    i.e. each quadrature gets noise_var / 2.
    """
    expected = (params.n_channels, params.n_symbols)
    if tx.shape != expected:
        raise ValueError(f"tx grid shape {tx.shape} != {expected}")
    if len(trace.theta_c) != params.n_symbols:
        raise ValueError("phase trace length does not match n_symbols")
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    signal = np.asarray(tx, dtype=np.complex128)
    if noise_var > 0:
        scale = np.sqrt(noise_var / 2.0)
        z = rng.normal(0.0, scale, size=expected) + 1j * rng.normal(0.0, scale, size=expected)
        signal = signal + z
    return np.exp(1j * phase_grid(params, trace)) * signal
