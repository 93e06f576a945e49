"""Monte Carlo experiment engine.

Runs full transmit-track-demodulate trials and aggregates them into sweep
tables: BER and realized phase-estimation error versus channel count,
oscillator linewidth, or reference-subset choice. Schemes compared at the
same sweep point consume identical random streams (common random numbers),
so ordering comparisons need far fewer trials than independent sampling
would.

One modeling note: the receiver is assumed to have acquired the static
phase offset of each channel at block start (an initial training stage).
Without that, projecting reference estimates onto assisted channels is
ambiguous modulo 2*pi because a uniform initial oscillator phase cannot
be recovered from wrapped pilot measurements. The trackers therefore see
the received grid derotated by the true initial channel phases and
estimate the drift relative to block start.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations, repeat

import numpy as np

from .model import SystemParams, apply_channel, gen_phase_trace, phase_grid
from .modem import BerReport, Constellation, count_errors, demap_hard, make_constellation, map_bits
from .optimizer import (
    MAX_ENUMERATION,
    build_reference_set,
    closed_form_optimal,
)
from .pilots import RAT, WDT, PilotPattern, PilotRateError, make_rat, make_wdt
from .streams import TrialStreams, trial_streams
from .tracker import (
    AUTO,
    DEFAULT_TRACKER,
    JOINT_2STATE,
    PILOT_INTERP,
    RA_PER_CHANNEL,
    TrackerConfig,
    mean_estimation_error,
    pilot_interp_baseline,
    ra_project,
    track_joint,
    track_reference_channels,
)

LOW_CONFIDENCE_EVENTS = 100

SWEEP_CHANNELS = "channels"
SWEEP_LINEWIDTH = "linewidth_r"
SWEEP_SUBSET = "subset"


@dataclass(frozen=True)
class Scheme:
    """A pilot scheme under test: wrapped-diagonal, or reference-aligned
    with a reference count (int, 'half' = (L+1)/2, 'full' = L) or an
    explicit index set."""

    kind: str
    d: int | str | None = None
    indices: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in (RAT, WDT):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == WDT and (self.d is not None or self.indices is not None):
            raise ValueError("wrapped-diagonal scheme takes no reference spec")
        if self.kind == RAT and self.d is None and self.indices is None:
            raise ValueError("reference-aligned scheme needs d or explicit indices")
        if isinstance(self.d, str) and self.d not in ("half", "full"):
            raise ValueError(f"d must be an int, 'half' or 'full', got {self.d!r}")

    def resolve_d(self, n_channels: int) -> int | None:
        if self.kind == WDT:
            return None
        if self.indices is not None:
            return len(self.indices)
        if self.d == "half":
            return (n_channels + 1) // 2
        if self.d == "full":
            return n_channels
        return int(self.d)


def format_subset(indices) -> str:
    return "{" + ",".join(str(i) for i in indices) + "}"


def scheme_fits(scheme: Scheme, n_channels: int) -> bool:
    """Structural applicability of a scheme at one channel count.

    Rate feasibility is deliberately not checked here; rate-infeasible
    sweep points are reported as flagged rows, not rejected up front.
    """
    if scheme.kind == WDT:
        return True
    m_max = (n_channels - 1) // 2
    if scheme.indices is not None:
        return all(-m_max <= i <= m_max for i in scheme.indices)
    d = scheme.resolve_d(n_channels)
    return 2 <= d <= n_channels


def build_pattern(params: SystemParams, scheme: Scheme, c: Constellation) -> PilotPattern:
    """Materialize the pilot mask for a scheme; pilots use the max-energy point."""
    pilot = c.max_energy_point()
    if scheme.kind == WDT:
        return make_wdt(params, pilot)
    if scheme.indices is not None:
        rs = build_reference_set(params.n_channels, scheme.indices)
    else:
        rs = closed_form_optimal(params.n_channels, scheme.resolve_d(params.n_channels))
    return make_rat(params, rs, pilot)


def _estimate_phases(y, pattern: PilotPattern, params: SystemParams,
                     cfg: TrackerConfig) -> np.ndarray:
    variant = cfg.variant
    if variant == AUTO:
        variant = RA_PER_CHANNEL if pattern.kind == RAT else JOINT_2STATE

    if variant == JOINT_2STATE:
        return track_joint(y, pattern, params, cfg).theta_hat

    if variant == RA_PER_CHANNEL or (variant == PILOT_INTERP and pattern.kind == RAT):
        rs = pattern.reference_set
        if rs is None:
            raise ValueError("per-reference tracking needs a reference-aligned pattern")
        rows = [i + params.m_max for i in rs.indices]
        if variant == RA_PER_CHANNEL:
            pilot_times = np.flatnonzero(pattern.mask[rows[0]])
            theta_refs, _ = track_reference_channels(
                y[rows], pilot_times, rs.indices, pattern.pilot_symbol, params, cfg
            )
        else:
            theta_refs = np.vstack([
                pilot_interp_baseline(y[r], pattern.mask[r], pattern.pilot_symbol, params, cfg)
                for r in rows
            ])
        return ra_project(theta_refs, rs).theta_hat

    # Pilot interpolation on every channel (wrapped-diagonal masks).
    return np.vstack([
        pilot_interp_baseline(y[r], pattern.mask[r], pattern.pilot_symbol, params, cfg)
        for r in range(params.n_channels)
    ])


@dataclass
class TrialResult:
    report: BerReport
    mean_est_error: float


def run_trial(
    params: SystemParams,
    scheme: Scheme,
    streams: TrialStreams,
    *,
    order: int = 64,
    constellation: Constellation | None = None,
    tracker_cfg: TrackerConfig = DEFAULT_TRACKER,
    pattern: PilotPattern | None = None,
) -> TrialResult:
    """One full pipeline pass: bits -> channel -> tracking -> BER.

    Deterministic given the streams; the realized mean estimation error
    is the time average of ||theta_k - theta_hat_k||^2 with wrapped
    differences, over all slots and channels.
    """
    c = constellation if constellation is not None else make_constellation(order)
    if pattern is None:
        pattern = build_pattern(params, scheme, c)
    L, n = params.n_channels, params.n_symbols
    bps = c.bits_per_symbol
    noise_var = params.noise_variance()

    bits = streams.data.integers(0, 2, size=(L, n * bps), dtype=np.uint8)
    symbols = map_bits(bits.reshape(-1), c).reshape(L, n)
    tx = np.where(pattern.mask, pattern.pilot_symbol, symbols)

    trace = gen_phase_trace(params, streams.phase)
    y = apply_channel(tx, params, trace, noise_var, streams.noise)

    theta = phase_grid(params, trace)
    # Initial static offsets assumed known from acquisition (see module doc).
    y = y * np.exp(-1j * theta[:, :1])
    theta_rel = theta - theta[:, :1]

    est = _estimate_phases(y, pattern, params, tracker_cfg)
    rx_bits = demap_hard((y * np.exp(-1j * est)).reshape(-1), c).reshape(L, n * bps)
    data_bit_mask = np.repeat(pattern.data_mask, bps, axis=1)
    report = count_errors(bits, rx_bits, data_bit_mask)
    e_d = mean_estimation_error(theta_rel, est)
    report.mean_est_error = e_d
    return TrialResult(report=report, mean_est_error=e_d)


@dataclass
class SweepRow:
    """One aggregated (sweep point, scheme) result."""

    sweep: str
    sweep_value: object  # int, float or subset string
    scheme: str
    d: int | None
    dset: str
    ber: float
    ber_stderr: float
    mean_est_error: float
    mean_est_error_stderr: float
    error_events: int
    trials: int
    n_symbols: int
    seed: int
    config_hash: str
    status: str


CSV_COLUMNS = [
    "sweep", "sweep_value", "scheme", "d", "dset", "ber", "ber_stderr",
    "mean_est_error", "mean_est_error_stderr", "error_events", "trials",
    "n_symbols", "seed", "config_hash", "status",
]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_csv_cell(getattr(row, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_dicts(rows: list[SweepRow]) -> list[dict]:
    return [{col: getattr(row, col) for col in CSV_COLUMNS} for row in rows]


def _stderr(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _scheme_rows(
    params: SystemParams,
    schemes,
    c: Constellation,
    tracker_cfg: TrackerConfig,
    sweep: str,
    sweep_value,
    sweep_index: int,
    trials: int,
    config_hash: str,
) -> list[SweepRow]:
    rows = []
    for scheme in schemes:
        d = scheme.resolve_d(params.n_channels)
        try:
            # ValueError covers schemes that do not fit this channel count
            # (reference index out of range, d > L at this sweep point).
            pattern = build_pattern(params, scheme, c)
        except (PilotRateError, ValueError):
            rows.append(SweepRow(
                sweep=sweep, sweep_value=sweep_value, scheme=scheme.kind, d=d,
                dset="", ber=float("nan"), ber_stderr=float("nan"),
                mean_est_error=float("nan"), mean_est_error_stderr=float("nan"),
                error_events=0, trials=trials, n_symbols=params.n_symbols,
                seed=params.seed, config_hash=config_hash, status="infeasible",
            ))
            continue
        dset = format_subset(pattern.reference_set.indices) if pattern.reference_set else ""
        bers, errs = [], []
        events = 0
        for trial in range(trials):
            streams = trial_streams(params.seed, sweep_index, trial)
            result = run_trial(params, scheme, streams, constellation=c,
                               tracker_cfg=tracker_cfg, pattern=pattern)
            bers.append(result.report.ber_aggregate)
            errs.append(result.mean_est_error)
            events += int(result.report.bit_errors_per_channel.sum())
        status = "ok" if events >= LOW_CONFIDENCE_EVENTS else "low_confidence"
        rows.append(SweepRow(
            sweep=sweep, sweep_value=sweep_value, scheme=scheme.kind, d=d,
            dset=dset, ber=float(np.mean(bers)), ber_stderr=_stderr(bers),
            mean_est_error=float(np.mean(errs)), mean_est_error_stderr=_stderr(errs),
            error_events=events, trials=trials, n_symbols=params.n_symbols,
            seed=params.seed, config_hash=config_hash, status=status,
        ))
    return rows


@dataclass(frozen=True)
class ResolvedExperiment:
    """Fully resolved experiment: base parameters plus one sweep axis."""

    sweep_kind: str
    sweep_values: tuple
    schemes: tuple[Scheme, ...]
    base: SystemParams
    trials: int
    tracker: TrackerConfig = DEFAULT_TRACKER
    order: int = 64
    config_hash: str = ""
    subset_d: int | None = None
    workers: int = 1

    def params_for(self, value) -> SystemParams:
        if self.sweep_kind == SWEEP_CHANNELS:
            return replace(self.base, n_channels=int(value))
        if self.sweep_kind == SWEEP_LINEWIDTH:
            return replace(self.base, delta_nu_r=float(value))
        return self.base


def _channels_cell(exp: ResolvedExperiment, index: int, value) -> list[SweepRow]:
    params = exp.params_for(value)
    c = make_constellation(exp.order)
    return _scheme_rows(params, exp.schemes, c, exp.tracker, exp.sweep_kind,
                        value, index, exp.trials, exp.config_hash)


def _subset_cell(exp: ResolvedExperiment, subset: tuple[int, ...]) -> list[SweepRow]:
    scheme = Scheme(kind=RAT, indices=subset)
    c = make_constellation(exp.order)
    # sweep_index 0 for every subset: identical streams, paired comparison.
    rows = _scheme_rows(exp.base, [scheme], c, exp.tracker, SWEEP_SUBSET,
                        format_subset(subset), 0, exp.trials, exp.config_hash)
    return rows


def run_experiment(exp: ResolvedExperiment) -> list[SweepRow]:
    """Dispatch on the sweep axis; rows come back in deterministic order."""
    if exp.sweep_kind == SWEEP_SUBSET:
        return subset_scan_resolved(exp)
    if exp.sweep_kind not in (SWEEP_CHANNELS, SWEEP_LINEWIDTH):
        raise ValueError(f"unknown sweep kind {exp.sweep_kind!r}")
    tasks = list(enumerate(exp.sweep_values))
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            cells = list(pool.map(_channels_cell, repeat(exp),
                                  [i for i, _ in tasks], [v for _, v in tasks]))
    else:
        cells = [_channels_cell(exp, i, v) for i, v in tasks]
    return [row for cell in cells for row in cell]


def subset_scan_resolved(exp: ResolvedExperiment) -> list[SweepRow]:
    L = exp.base.n_channels
    d = exp.subset_d
    if d is None or not 2 <= d <= L:
        raise ValueError(f"subset scan needs 2 <= d <= {L}, got {d}")
    n_subsets = math.comb(L, d)
    if n_subsets > MAX_ENUMERATION:
        raise ValueError(
            f"C({L},{d}) = {n_subsets} subsets exceeds the scan guard "
            f"({MAX_ENUMERATION}); use brute_force_optimal for the criterion instead"
        )
    m_max = exp.base.m_max
    subsets = list(combinations(range(-m_max, m_max + 1), d))
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            cells = list(pool.map(_subset_cell, repeat(exp), subsets))
    else:
        cells = [_subset_cell(exp, s) for s in subsets]
    rows = [row for cell in cells for row in cell]
    rows.sort(key=lambda r: (r.mean_est_error, str(r.sweep_value)))
    return rows


def sweep_channels(base: SystemParams, channel_counts, schemes, trials: int,
                   **kwargs) -> list[SweepRow]:
    """BER/error rows for each (channel count, scheme) pair."""
    exp = ResolvedExperiment(sweep_kind=SWEEP_CHANNELS, sweep_values=tuple(channel_counts),
                             schemes=tuple(schemes), base=base, trials=trials, **kwargs)
    return run_experiment(exp)


def sweep_linewidth(base: SystemParams, linewidths_r, schemes, trials: int,
                    **kwargs) -> list[SweepRow]:
    """BER/error rows for each (oscillator linewidth, scheme) pair."""
    exp = ResolvedExperiment(sweep_kind=SWEEP_LINEWIDTH, sweep_values=tuple(linewidths_r),
                             schemes=tuple(schemes), base=base, trials=trials, **kwargs)
    return run_experiment(exp)


def subset_scan(base: SystemParams, d: int, trials: int, **kwargs) -> list[SweepRow]:
    """Realized estimation error for every size-d reference subset, ascending."""
    exp = ResolvedExperiment(sweep_kind=SWEEP_SUBSET, sweep_values=(), schemes=(),
                             base=base, trials=trials, subset_d=d, **kwargs)
    return subset_scan_resolved(exp)
