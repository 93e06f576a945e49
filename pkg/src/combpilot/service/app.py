"""HTTP front end over the optimizer and the Monte Carlo harness.

Endpoints are synchronous request/response: /optimize and /calibrate-snr
return immediately, /simulate blocks until the sweep finishes and returns
the rows plus the exact CSV text the CLI writes to disk. Domain errors
raised while interpreting a request map to 422.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunConfig, resolve_config
from ..harness import rows_to_csv, rows_to_dicts, run_experiment
from ..modem import calibrate_snr, qam_ber_analytic
from ..optimizer import (
    brute_force_optimal,
    closed_form_optimal,
    enumerate_criteria,
    frobenius_criterion,
)
from .schemas import (
    CalibrateSnrRequest,
    CalibrateSnrResponse,
    HealthResponse,
    OptimizeRequest,
    OptimizeResponse,
    SimulateResponse,
    SubsetResult,
    SweepRowModel,
)

CRITERION_MATCH_TOL = 1e-10


def create_app() -> FastAPI:
    app = FastAPI(title="combpilot", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", name="combpilot", version=__version__)

    @app.post("/optimize", response_model=OptimizeResponse)
    def optimize(req: OptimizeRequest) -> OptimizeResponse:
        try:
            resp = OptimizeResponse(n_channels=req.n_channels, d=req.d)
            if req.method in ("closed_form", "both"):
                rs = closed_form_optimal(req.n_channels, req.d)
                resp.closed_form = SubsetResult(indices=list(rs.indices),
                                                criterion=frobenius_criterion(rs))
            if req.method in ("brute_force", "both"):
                rs, crit = brute_force_optimal(req.n_channels, req.d)
                resp.brute_force = SubsetResult(indices=list(rs.indices), criterion=crit)
            if resp.closed_form is not None and resp.brute_force is not None:
                resp.agree = (
                    math.isfinite(resp.closed_form.criterion)
                    and abs(resp.closed_form.criterion - resp.brute_force.criterion)
                    <= CRITERION_MATCH_TOL
                )
            if req.include_table:
                resp.table = [
                    SubsetResult(indices=list(subset), criterion=crit)
                    for subset, crit in sorted(enumerate_criteria(req.n_channels, req.d),
                                               key=lambda item: (item[1], item[0]))
                ]
            return resp
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/calibrate-snr", response_model=CalibrateSnrResponse)
    def calibrate(req: CalibrateSnrRequest) -> CalibrateSnrResponse:
        try:
            snr_db = calibrate_snr(req.target_ber, req.order)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return CalibrateSnrResponse(order=req.order, target_ber=req.target_ber,
                                    snr_db=snr_db,
                                    analytic_ber=qam_ber_analytic(req.order, snr_db))

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(cfg: RunConfig) -> SimulateResponse:
        try:
            resolved = resolve_config(cfg)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        rows = run_experiment(resolved)
        return SimulateResponse(
            config_hash=resolved.config_hash,
            resolved_config=cfg.model_dump(mode="json"),
            rows=[SweepRowModel(**d) for d in rows_to_dicts(rows)],
            csv=rows_to_csv(rows),
        )

    return app
