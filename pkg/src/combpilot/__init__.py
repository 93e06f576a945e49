"""combpilot: pilot placement and correlated phase-noise tracking for comb systems."""

__version__ = "0.1.0"

from .model import PhaseTrace, SystemParams, apply_channel, channel_phase, gen_phase_trace, mixing_matrix
from .modem import BerReport, Constellation, calibrate_snr, count_errors, demap_hard, make_constellation, map_bits, qam_ber_analytic
from .optimizer import ReferenceSet, brute_force_optimal, build_reference_set, closed_form_optimal, d_opt_heuristic, frobenius_criterion
from .pilots import PilotPattern, PilotRateError, make_rat, make_wdt
from .tracker import PhaseEstimate, TrackerConfig, UnobservableError, phase_measurement, pilot_interp_baseline, ra_project, track_joint, track_reference_channel
from .harness import Scheme, SweepRow, run_trial, subset_scan, sweep_channels, sweep_linewidth

__all__ = [
    "__version__",
    "SystemParams", "PhaseTrace", "gen_phase_trace", "channel_phase", "apply_channel", "mixing_matrix",
    "Constellation", "make_constellation", "map_bits", "demap_hard", "qam_ber_analytic",
    "calibrate_snr", "count_errors", "BerReport",
    "ReferenceSet", "build_reference_set", "frobenius_criterion", "brute_force_optimal",
    "closed_form_optimal", "d_opt_heuristic",
    "PilotPattern", "PilotRateError", "make_rat", "make_wdt",
    "TrackerConfig", "PhaseEstimate", "UnobservableError", "phase_measurement",
    "track_reference_channel", "track_joint", "ra_project", "pilot_interp_baseline",
    "Scheme", "SweepRow", "run_trial", "subset_scan", "sweep_channels", "sweep_linewidth",
]
