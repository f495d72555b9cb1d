"""HTTP service wrapping the simulation package.

Compute endpoints take an experiment config as the request body and
return tables plus a run manifest.  Validation failures surface as 422
(malformed config) or as a structured report from /v1/validate-config;
numerical self-check outcomes ride on the holo response.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from .. import __version__
from ..config import ExperimentConfig
from ..core import UnsupportedGradientError
from ..holo import CarrierAliasError
from ..runners import (RunnerError, fisher_scan, holo_run, ideal_sweep,
                       jitter_study, make_manifest, noise_sweep, _Stopwatch)
from .schemas import (HealthResponse, HoloResponse, ManifestModel,
                      SweepResponse, TableModel, ValidationIssue,
                      ValidationResponse)

app = FastAPI(title="spadesim", version=__version__)


@app.exception_handler(RunnerError)
async def _runner_error(request: Request, exc: RunnerError):
    return JSONResponse(status_code=422,
                        content={"detail": [{"loc": ["config"], "msg": str(exc)}]})


@app.exception_handler(CarrierAliasError)
async def _carrier_error(request: Request, exc: CarrierAliasError):
    return JSONResponse(status_code=422,
                        content={"detail": [{"loc": ["config", "holo"],
                                             "msg": str(exc)}]})


@app.exception_handler(UnsupportedGradientError)
async def _gradient_error(request: Request, exc: UnsupportedGradientError):
    return JSONResponse(status_code=422,
                        content={"detail": [{"loc": ["config", "motion"],
                                             "msg": str(exc)}]})


def _json_cell(value):
    # JSON has no NaN; ship it as the same literal the CSV uses
    if isinstance(value, float) and value != value:
        return "nan"
    return value


def _tables(tables) -> list:
    return [TableModel(name=t.name, columns=t.columns,
                       rows=[[_json_cell(v) for v in row] for row in t.rows],
                       csv=t.to_csv()) for t in tables]


def _sweep_response(command: str, config: ExperimentConfig, tables,
                    wall_time: float) -> SweepResponse:
    manifest = make_manifest(command, config, wall_time)
    return SweepResponse(tables=_tables(tables),
                         manifest=ManifestModel(**manifest.to_dict()),
                         config=config.model_dump(mode="json"))


@app.get("/health", response_model=HealthResponse)
async def health():
    return HealthResponse(status="ok", version=__version__)


@app.post("/v1/validate-config", response_model=ValidationResponse)
async def validate_config(body: dict):
    try:
        ExperimentConfig(**body)
    except ValidationError as err:
        issues = [ValidationIssue(
            location=".".join(str(p) for p in e["loc"]), message=e["msg"])
            for e in err.errors()]
        return ValidationResponse(valid=False, issues=issues)
    except TypeError as err:
        return ValidationResponse(valid=False, issues=[
            ValidationIssue(location="config", message=str(err))])
    return ValidationResponse(valid=True)


@app.post("/v1/fisher-scan", response_model=SweepResponse)
def fisher_scan_endpoint(config: ExperimentConfig):
    with _Stopwatch() as sw:
        tables = fisher_scan(config)
    return _sweep_response("fisher-scan", config, tables, sw.elapsed)


@app.post("/v1/ideal-sweep", response_model=SweepResponse)
def ideal_sweep_endpoint(config: ExperimentConfig):
    with _Stopwatch() as sw:
        tables = ideal_sweep(config)
    return _sweep_response("ideal-sweep", config, tables, sw.elapsed)


@app.post("/v1/noise-sweep", response_model=SweepResponse)
def noise_sweep_endpoint(config: ExperimentConfig):
    with _Stopwatch() as sw:
        tables = noise_sweep(config)
    return _sweep_response("noise-sweep", config, tables, sw.elapsed)


@app.post("/v1/jitter-study", response_model=SweepResponse)
def jitter_study_endpoint(config: ExperimentConfig):
    with _Stopwatch() as sw:
        tables = jitter_study(config)
    return _sweep_response("jitter-study", config, tables, sw.elapsed)


@app.post("/v1/holo", response_model=HoloResponse)
def holo_endpoint(config: ExperimentConfig):
    with _Stopwatch() as sw:
        result = holo_run(config)
    manifest = make_manifest("holo", config, sw.elapsed)
    return HoloResponse(tables=_tables(result.tables),
                        manifest=ManifestModel(**manifest.to_dict()),
                        config=config.model_dump(mode="json"),
                        self_check_passed=result.self_check_passed,
                        max_fraction_error=result.max_fraction_error,
                        max_leakage=result.max_leakage,
                        j1_residual=result.j1_residual,
                        max_c1_error=result.max_c1_error,
                        hologram_png_base64=result.png_base64,
                        sidecar=result.sidecar)


def serve():
    """Run the service under uvicorn (console entry point)."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="spadesim HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run(app, host=args.host, port=args.port)
