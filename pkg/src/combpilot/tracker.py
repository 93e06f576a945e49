"""Pilot-aided phase tracking.

Two extended Kalman smoothers share the same linearized pilot phase
observation: a bank of scalar random-walk trackers (one per reference
channel, used with reference-aligned pilots and followed by the
projection onto all channels) and a joint two-state tracker for the
common/oscillator phase pair (natural for wrapped-diagonal pilots).
Measurement updates happen at pilot slots only; innovations are wrapped
to [-pi, pi) while the state itself stays unwrapped. A pilot-angle
linear-interpolation baseline is included for sanity comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import SystemParams, wrap_angle
from .pilots import PilotPattern

DEFAULT_INIT_COV = math.pi ** 2 / 3.0  # variance of U[-pi, pi)
DEFAULT_MEAS_FLOOR = 1e-9  # rad^2

RA_PER_CHANNEL = "ra_per_channel"
JOINT_2STATE = "joint_2state"
PILOT_INTERP = "pilot_interp"
AUTO = "auto"
_VARIANTS = (AUTO, RA_PER_CHANNEL, JOINT_2STATE, PILOT_INTERP)


class UnobservableError(ValueError):
    """The pilot pattern does not make the requested state observable."""


@dataclass(frozen=True)
class TrackerConfig:
    variant: str = AUTO
    init_cov: float = DEFAULT_INIT_COV
    meas_floor: float = DEFAULT_MEAS_FLOOR

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown tracker variant {self.variant!r}")
        if self.init_cov <= 0 or self.meas_floor <= 0:
            raise ValueError("init_cov and meas_floor must be positive")


DEFAULT_TRACKER = TrackerConfig()


@dataclass
class PhaseEstimate:
    """Unwrapped phase estimates for all channels over one block."""

    theta_hat: NDArray[np.float64]  # L x N
    est_error_sq: NDArray[np.float64] | None = None  # per-time ||err||^2 vs truth


def phase_measurement(y: complex, pilot: complex, noise_var: float,
                      meas_floor: float = DEFAULT_MEAS_FLOOR):
    """Pilot phase observation: wrapped angle of y * conj(pilot) and its variance.

    The variance is the small-error linearization noise_var / (2 |pilot|^2),
    floored to keep the Kalman update well conditioned at zero noise.
    """
    energy = abs(pilot) ** 2
    if energy == 0:
        raise ValueError("pilot symbol must be non-zero")
    angle = wrap_angle(np.angle(np.asarray(y) * np.conj(pilot)))
    variance = max(noise_var / (2.0 * energy), meas_floor)
    return angle, variance


def _check_smoothed_not_worse(p_smooth, p_filt):
    # Fixed-interval smoothing can only reduce posterior variance.
    if np.any(p_smooth > p_filt * (1.0 + 1e-9) + 1e-15):
        raise RuntimeError("smoothed variance exceeded filtered variance")


def track_reference_channels(
    y_rows: NDArray[np.complexfloating],
    pilot_times: NDArray[np.integer],
    ms,
    pilot: complex,
    params: SystemParams,
    cfg: TrackerConfig = DEFAULT_TRACKER,
):
    """Scalar EKS per channel, vectorized over the channel axis.

    All rows share the pilot time grid (reference-aligned placement).
    Channel m evolves as a random walk with per-step variance
    sigma2_c + m^2 * sigma2_r. Returns smoothed means and variances,
    both shaped like y_rows.
    """
    y_rows = np.atleast_2d(np.asarray(y_rows))
    ms = np.asarray(ms, dtype=float).ravel()
    n_rows, n = y_rows.shape
    if ms.shape != (n_rows,):
        raise ValueError(f"got {n_rows} rows but {ms.size} channel indices")
    pilot_times = np.unique(np.asarray(pilot_times, dtype=int).ravel())
    if pilot_times.size < 2:
        raise UnobservableError("need at least 2 pilot slots to track a drifting phase")
    if pilot_times[0] < 0 or pilot_times[-1] >= n:
        raise ValueError("pilot time outside the block")

    noise_var = params.noise_variance()
    z, r = phase_measurement(y_rows[:, pilot_times], pilot, noise_var, cfg.meas_floor)
    q = params.sigma2_c + ms ** 2 * params.sigma2_r  # per-channel process variance

    # The state mean is constant and the variance grows linearly between
    # measurements, so the filter only needs to visit pilot slots; the
    # in-between slots are reconstructed in closed form afterwards.
    n_pilots = pilot_times.size
    mu_up = np.empty((n_pilots, n_rows))  # filtered mean after each update
    p_up = np.empty((n_pilots, n_rows))
    p_pr = np.empty((n_pilots, n_rows))  # predicted variance at each pilot slot

    mu = np.zeros(n_rows)
    p = np.full(n_rows, cfg.init_cov)
    prev_k = 0
    for i, t in enumerate(pilot_times):
        p_pred = p + (t - prev_k) * q
        innov = wrap_angle(z[:, i] - mu)
        gain = p_pred / (p_pred + r)
        mu = mu + gain * innov
        p = (1.0 - gain) * p_pred
        p_pr[i] = p_pred
        mu_up[i] = mu
        p_up[i] = p
        prev_k = t

    # RTS pass across the pilot anchors only.
    mu_sm = np.empty_like(mu_up)
    p_sm = np.empty_like(p_up)
    mu_sm[-1] = mu_up[-1]
    p_sm[-1] = p_up[-1]
    for i in range(n_pilots - 2, -1, -1):
        c = p_up[i] / p_pr[i + 1]
        mu_sm[i] = mu_up[i] + c * (mu_sm[i + 1] - mu_up[i])
        p_sm[i] = p_up[i] + c * c * (p_sm[i + 1] - p_pr[i + 1])

    # Closed-form bridge for every slot: with w_k the filtered variance
    # carried forward from the preceding anchor, the smoothed mean and
    # variance interpolate as
    #   mu_s[k] = mu_a + (w_k / p_pred_b) * (mu_s[b] - mu_a)
    #   p_s[k]  = w_k + w_k^2 * (p_s[b] - p_pred_b) / p_pred_b^2
    # which telescopes the per-step RTS recursion exactly. Before the
    # first pilot the anchor is the (0, init_cov) prior; after the last
    # pilot the smoothed state equals the filtered one.
    ks = np.arange(n)
    seg = np.searchsorted(pilot_times, ks, side="right") - 1  # -1 = before first pilot

    pre = seg < 0
    anchor = np.clip(seg, 0, n_pilots - 1)
    anchor_t = np.where(pre, 0, pilot_times[anchor])
    anchor_mu = np.where(pre[None, :], 0.0, mu_up[anchor].T)
    anchor_p = np.where(pre[None, :], cfg.init_cov, p_up[anchor].T)
    w = anchor_p + q[:, None] * (ks - anchor_t)[None, :]

    nxt = np.clip(np.where(pre, 0, anchor + 1), 0, n_pilots - 1)
    has_next = pre | (seg < n_pilots - 1)
    nx_pred = p_pr[nxt].T
    nx_mu = mu_sm[nxt].T
    nx_var = p_sm[nxt].T

    ratio = np.where(has_next[None, :], w / nx_pred, 0.0)
    theta = anchor_mu + ratio * (nx_mu - anchor_mu)
    var = w + ratio * ratio * np.where(has_next[None, :], nx_var - nx_pred, 0.0)

    _check_smoothed_not_worse(var, w)
    return theta, var


def track_reference_channel(
    y_row: NDArray[np.complexfloating],
    pattern_row: NDArray[np.bool_],
    m: int,
    pilot: complex,
    params: SystemParams,
    cfg: TrackerConfig = DEFAULT_TRACKER,
):
    """Smoothed phase track of a single reference channel; see track_reference_channels."""
    pilot_times = np.flatnonzero(np.asarray(pattern_row, dtype=bool))
    theta, var = track_reference_channels(
        np.asarray(y_row)[None, :], pilot_times, [m], pilot, params, cfg
    )
    return theta[0], var[0]


def track_joint(
    y: NDArray[np.complexfloating],
    pattern: PilotPattern,
    params: SystemParams,
    cfg: TrackerConfig = DEFAULT_TRACKER,
    return_states: bool = False,
):
    """Two-state EKS on [theta_c, theta_r] over every pilot in the mask.

    Each pilot on channel m at slot k is a scalar observation
    theta_c + m * theta_r with Jacobian [1, m]. Multiple pilots in one
    slot update sequentially. After the backward pass the full grid is
    rebuilt as theta_c + m * theta_r.

    With return_states, also returns (state_mean 2 x N, state_var 2 x N)
    for the smoothed [theta_c, theta_r] trajectory.
    """
    y = np.asarray(y)
    L, n = params.n_channels, params.n_symbols
    if y.shape != (L, n):
        raise ValueError(f"grid shape {y.shape} != {(L, n)}")
    if pattern.mask.shape != (L, n):
        raise ValueError("pilot mask shape does not match params")

    pilot_rows, pilot_cols = np.nonzero(pattern.mask)
    if np.unique(pilot_rows).size < 2:
        raise UnobservableError(
            "pilots on fewer than 2 distinct channels leave the oscillator phase unobservable"
        )

    noise_var = params.noise_variance()
    z_all, r = phase_measurement(y[pilot_rows, pilot_cols], pattern.pilot_symbol,
                                 noise_var, cfg.meas_floor)
    m_all = (pilot_rows - params.m_max).astype(float)

    # Group pilot measurements by time slot.
    order = np.argsort(pilot_cols, kind="stable")
    cols_sorted = pilot_cols[order]
    z_sorted = z_all[order]
    m_sorted = m_all[order]
    slot_starts = {}
    for pos, col in enumerate(cols_sorted):
        slot_starts.setdefault(int(col), []).append(pos)

    qc, qr = params.sigma2_c, params.sigma2_r

    xc_f = np.empty(n)
    xr_f = np.empty(n)
    p00_f = np.empty(n)
    p01_f = np.empty(n)
    p11_f = np.empty(n)

    xc = xr = 0.0
    p00 = p11 = cfg.init_cov
    p01 = 0.0
    zs = z_sorted.tolist()
    mss = m_sorted.tolist()
    for k in range(n):
        if k > 0:
            p00 += qc
            p11 += qr
        for pos in slot_starts.get(k, ()):
            m = mss[pos]
            # h = [1, m]; scalar innovation update
            ph0 = p00 + m * p01
            ph1 = p01 + m * p11
            s = ph0 + m * ph1 + r
            k0 = ph0 / s
            k1 = ph1 / s
            innov = wrap_angle(zs[pos] - (xc + m * xr))
            xc += k0 * innov
            xr += k1 * innov
            p00 -= k0 * ph0
            p01 -= k0 * ph1
            p11 -= k1 * ph1
        xc_f[k] = xc
        xr_f[k] = xr
        p00_f[k] = p00
        p01_f[k] = p01
        p11_f[k] = p11

    # RTS backward pass; F = I so the predicted covariance at k+1 is
    # filtered(k) + diag(qc, qr).
    xc_s = np.empty(n)
    xr_s = np.empty(n)
    s00 = np.empty(n)
    s01 = np.empty(n)
    s11 = np.empty(n)
    xc_s[-1], xr_s[-1] = xc_f[-1], xr_f[-1]
    s00[-1], s01[-1], s11[-1] = p00_f[-1], p01_f[-1], p11_f[-1]
    for k in range(n - 2, -1, -1):
        a00 = p00_f[k]
        a01 = p01_f[k]
        a11 = p11_f[k]
        b00 = a00 + qc
        b01 = a01
        b11 = a11 + qr
        det = b00 * b11 - b01 * b01
        i00, i01, i11 = b11 / det, -b01 / det, b00 / det
        # G = P_f @ inv(P_pred)
        g00 = a00 * i00 + a01 * i01
        g01 = a00 * i01 + a01 * i11
        g10 = a01 * i00 + a11 * i01
        g11 = a01 * i01 + a11 * i11
        dxc = xc_s[k + 1] - xc_f[k]
        dxr = xr_s[k + 1] - xr_f[k]
        xc_s[k] = xc_f[k] + g00 * dxc + g01 * dxr
        xr_s[k] = xr_f[k] + g10 * dxc + g11 * dxr
        d00 = s00[k + 1] - b00
        d01 = s01[k + 1] - b01
        d11 = s11[k + 1] - b11
        # P_s = P_f + G (P_s' - P_pred) G^T
        t00 = g00 * d00 + g01 * d01
        t01 = g00 * d01 + g01 * d11
        t10 = g10 * d00 + g11 * d01
        t11 = g10 * d01 + g11 * d11
        s00[k] = a00 + t00 * g00 + t01 * g01
        s01[k] = a01 + t00 * g10 + t01 * g11
        s11[k] = a11 + t10 * g10 + t11 * g11

    _check_smoothed_not_worse(s00, p00_f)
    _check_smoothed_not_worse(s11, p11_f)

    m_col = params.channel_indices()[:, None].astype(float)
    theta_hat = xc_s[None, :] + m_col * xr_s[None, :]
    est = PhaseEstimate(theta_hat=theta_hat)
    if return_states:
        state_mean = np.vstack([xc_s, xr_s])
        state_var = np.vstack([s00, s11])
        return est, state_mean, state_var
    return est


def ra_project(theta_hat_refs: NDArray[np.float64], dset) -> PhaseEstimate:
    """Spread reference-channel estimates to all channels: T Q^+ theta_refs."""
    theta_hat_refs = np.atleast_2d(np.asarray(theta_hat_refs))
    if theta_hat_refs.shape[0] != dset.d:
        raise ValueError(
            f"got {theta_hat_refs.shape[0]} reference rows for a {dset.d}-element set"
        )
    return PhaseEstimate(theta_hat=dset.proj @ theta_hat_refs)


def pilot_interp_baseline(
    y_row: NDArray[np.complexfloating],
    pattern_row: NDArray[np.bool_],
    pilot: complex,
    params: SystemParams,
    cfg: TrackerConfig = DEFAULT_TRACKER,
) -> NDArray[np.float64]:
    """Unwrapped pilot angles, linearly interpolated over time.

    Constant extrapolation before the first and after the last pilot.
    """
    pattern_row = np.asarray(pattern_row, dtype=bool)
    pilot_times = np.flatnonzero(pattern_row)
    if pilot_times.size < 2:
        raise UnobservableError("need at least 2 pilots to interpolate")
    y_row = np.asarray(y_row)
    angles, _ = phase_measurement(y_row[pilot_times], pilot,
                                  params.noise_variance(), cfg.meas_floor)
    unwrapped = np.unwrap(angles)
    return np.interp(np.arange(y_row.size), pilot_times, unwrapped)


def estimation_error_sq(theta_true: NDArray[np.float64],
                        theta_hat: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-slot squared estimation error ||theta_k - theta_hat_k||^2.

    Differences are wrapped to [-pi, pi) before squaring, matching the
    convention that only the wrapped phase error is physically meaningful.
    """
    theta_true = np.atleast_2d(theta_true)
    theta_hat = np.atleast_2d(theta_hat)
    if theta_true.shape != theta_hat.shape:
        raise ValueError(f"shape mismatch {theta_true.shape} vs {theta_hat.shape}")
    err = wrap_angle(theta_true - theta_hat)
    return np.sum(err * err, axis=0)


def mean_estimation_error(theta_true, theta_hat) -> float:
    """Time-averaged squared error norm (the per-block realization of E||.||^2)."""
    return float(np.mean(estimation_error_sq(theta_true, theta_hat)))


def joint_states_to_csv(state_mean: NDArray[np.float64],
                        trace_c: NDArray[np.float64] | None = None,
                        trace_r: NDArray[np.float64] | None = None) -> str:
    """Debug dump of the smoothed two-state trajectory (optionally with truth)."""
    n = state_mean.shape[1]
    have_truth = trace_c is not None and trace_r is not None
    header = "k,theta_c_hat,theta_r_hat" + (",theta_c,theta_r" if have_truth else "")
    lines = [header]
    for k in range(n):
        row = f"{k},{state_mean[0, k]!r},{state_mean[1, k]!r}"
        if have_truth:
            row += f",{trace_c[k]!r},{trace_r[k]!r}"
        lines.append(row)
    return "\n".join(lines) + "\n"
