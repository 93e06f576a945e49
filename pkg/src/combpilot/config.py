"""Experiment configuration schema.

A RunConfig is the single serialized description of an experiment: base
transmission parameters, the pilot schemes under test, one sweep axis,
and the SNR policy. It is strict (unknown keys rejected) and fully
defaulted, so hashing the validated model pins every number a run can
produce. The same model doubles as the request body of the simulation
service.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .harness import (
    ResolvedExperiment,
    SWEEP_CHANNELS,
    SWEEP_LINEWIDTH,
    SWEEP_SUBSET,
    Scheme,
    scheme_fits,
)
from .model import SystemParams
from .modem import calibrate_snr
from .tracker import TrackerConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BaseParamsConfig(StrictModel):
    n_channels: int = Field(default=11, ge=3)
    delta_nu_c: float = Field(default=100e3, ge=0, description="CW laser linewidth, Hz")
    delta_nu_r: float = Field(default=100.0, ge=0, description="RF oscillator linewidth, Hz")
    symbol_rate: float = Field(default=20e9, gt=0)
    n_symbols: int = Field(default=20_000, ge=2)
    pilot_rate: float = Field(default=0.01, gt=0, le=1)

    @model_validator(mode="after")
    def _odd_channels(self):
        if self.n_channels % 2 == 0:
            raise ValueError("n_channels must be odd")
        return self


class SnrConfig(StrictModel):
    mode: Literal["fixed", "calibrated"] = "calibrated"
    snr_db: Optional[float] = None
    target_ber: float = Field(default=1e-3, gt=0, lt=0.5)

    @model_validator(mode="after")
    def _fixed_needs_value(self):
        if self.mode == "fixed" and self.snr_db is None:
            raise ValueError("snr.mode=fixed requires snr_db")
        return self


class SchemeConfig(StrictModel):
    kind: Literal["rat", "wdt"]
    d: Optional[int | Literal["half", "full"]] = None
    indices: Optional[list[int]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "wdt":
            if self.d is not None or self.indices is not None:
                raise ValueError("wdt scheme takes neither d nor indices")
        else:
            if (self.d is None) == (self.indices is None):
                raise ValueError("rat scheme needs exactly one of d or indices")
            if isinstance(self.d, int) and self.d < 2:
                raise ValueError("rat scheme needs d >= 2")
        return self

    def to_scheme(self) -> Scheme:
        indices = tuple(self.indices) if self.indices is not None else None
        return Scheme(kind=self.kind, d=self.d, indices=indices)


class SweepConfig(StrictModel):
    channel_counts: Optional[list[int]] = None
    linewidths_r: Optional[list[float]] = None
    subset_scan_d: Optional[int] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        axes = [self.channel_counts, self.linewidths_r, self.subset_scan_d]
        if sum(a is not None for a in axes) != 1:
            raise ValueError(
                "sweep needs exactly one of channel_counts, linewidths_r, subset_scan_d"
            )
        if self.channel_counts is not None:
            if not self.channel_counts:
                raise ValueError("channel_counts must be non-empty")
            for L in self.channel_counts:
                if L < 3 or L % 2 == 0:
                    raise ValueError(f"channel counts must be odd and >= 3, got {L}")
        if self.linewidths_r is not None:
            if not self.linewidths_r:
                raise ValueError("linewidths_r must be non-empty")
            if any(v < 0 for v in self.linewidths_r):
                raise ValueError("linewidths_r must be non-negative")
        if self.subset_scan_d is not None and self.subset_scan_d < 2:
            raise ValueError("subset_scan_d must be >= 2")
        return self

    @property
    def kind(self) -> str:
        if self.channel_counts is not None:
            return SWEEP_CHANNELS
        if self.linewidths_r is not None:
            return SWEEP_LINEWIDTH
        return SWEEP_SUBSET


class TrackerSettingsConfig(StrictModel):
    variant: Literal["auto", "ra_per_channel", "joint_2state", "pilot_interp"] = "auto"
    init_cov: float = Field(default=math.pi ** 2 / 3.0, gt=0)
    meas_floor: float = Field(default=1e-9, gt=0)

    def to_tracker(self) -> TrackerConfig:
        return TrackerConfig(variant=self.variant, init_cov=self.init_cov,
                             meas_floor=self.meas_floor)


class RunConfig(StrictModel):
    base: BaseParamsConfig = BaseParamsConfig()
    snr: SnrConfig = SnrConfig()
    sweep: SweepConfig
    schemes: list[SchemeConfig] = []
    trials: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    modulation_order: Literal[4, 16, 64] = 64
    tracker: TrackerSettingsConfig = TrackerSettingsConfig()
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _schemes_match_sweep(self):
        if self.sweep.kind == SWEEP_SUBSET:
            if self.schemes:
                raise ValueError("subset scans generate their own schemes; leave schemes empty")
        elif not self.schemes:
            raise ValueError("at least one scheme is required")
        return self


def config_hash(cfg: RunConfig) -> str:
    """Short stable hash of the validated config with all defaults filled in."""
    canon = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def resolve_config(cfg: RunConfig) -> ResolvedExperiment:
    """Turn a validated config into a runnable experiment.

    Calibrated SNR mode solves for the Es/N0 that hits the target BER on
    the analytic curve, once, before any simulation.
    """
    if cfg.snr.mode == "fixed":
        snr_db = float(cfg.snr.snr_db)
    else:
        snr_db = calibrate_snr(cfg.snr.target_ber, cfg.modulation_order)

    kind = cfg.sweep.kind
    subset_d = None
    if kind == SWEEP_CHANNELS:
        values = tuple(cfg.sweep.channel_counts)
        n_channels = values[0]
        delta_nu_r = cfg.base.delta_nu_r
    elif kind == SWEEP_LINEWIDTH:
        values = tuple(cfg.sweep.linewidths_r)
        n_channels = cfg.base.n_channels
        delta_nu_r = values[0]
    else:
        values = ()
        n_channels = cfg.base.n_channels
        delta_nu_r = cfg.base.delta_nu_r
        subset_d = cfg.sweep.subset_scan_d

    schemes = tuple(s.to_scheme() for s in cfg.schemes)
    sweep_ls = values if kind == SWEEP_CHANNELS else (n_channels,)
    for scheme in schemes:
        # A scheme may be inapplicable at some sweep points (flagged rows)
        # but a scheme that fits no point at all is a config error.
        if not any(scheme_fits(scheme, int(L)) for L in sweep_ls):
            raise ValueError(
                f"scheme {scheme.kind} with d={scheme.d} indices={scheme.indices} "
                f"fits none of the swept channel counts {list(sweep_ls)}"
            )

    base = SystemParams(
        n_channels=n_channels,
        delta_nu_c=cfg.base.delta_nu_c,
        delta_nu_r=delta_nu_r,
        symbol_rate=cfg.base.symbol_rate,
        snr_db=snr_db,
        n_symbols=cfg.base.n_symbols,
        pilot_rate=cfg.base.pilot_rate,
        seed=cfg.seed,
    )
    return ResolvedExperiment(
        sweep_kind=kind,
        sweep_values=values,
        schemes=schemes,
        base=base,
        trials=cfg.trials,
        tracker=cfg.tracker.to_tracker(),
        order=cfg.modulation_order,
        config_hash=config_hash(cfg),
        subset_d=subset_d,
        workers=cfg.workers,
    )
