"""Request/response models for the simulation service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from ..config import RunConfig  # noqa: F401  (request body of /simulate)


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_channels: int = Field(ge=3)
    d: int = Field(ge=2)
    method: Literal["closed_form", "brute_force", "both"] = "both"
    include_table: bool = False


class SubsetResult(BaseModel):
    indices: list[int]
    criterion: float


class OptimizeResponse(BaseModel):
    n_channels: int
    d: int
    closed_form: Optional[SubsetResult] = None
    brute_force: Optional[SubsetResult] = None
    agree: Optional[bool] = None
    table: Optional[list[SubsetResult]] = None


class CalibrateSnrRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    order: Literal[4, 16, 64] = 64
    target_ber: float = Field(default=1e-3, gt=0, lt=0.5)


class CalibrateSnrResponse(BaseModel):
    order: int
    target_ber: float
    snr_db: float
    analytic_ber: float


class SweepRowModel(BaseModel):
    sweep: str
    sweep_value: Union[int, float, str]
    scheme: str
    d: Optional[int] = None
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


class SimulateResponse(BaseModel):
    config_hash: str
    resolved_config: dict
    rows: list[SweepRowModel]
    csv: str


class HealthResponse(BaseModel):
    status: str
    name: str
    version: str
