"""FastAPI application wrapping the training pipeline.

Endpoints mirror the pipeline stages; handlers are plain functions so
FastAPI runs them on its worker threadpool (training and sweeps can take
minutes).  Package errors surface as structured JSON bodies carrying the
machine-parsable error category.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, workflows
from ..config import parse_config
from ..errors import ConfigError, RockError
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(title="rock", version=__version__)

    @app.exception_handler(RockError)
    async def _rock_error(request: Request, exc: RockError):
        status = 422 if isinstance(exc, ConfigError) else 400
        body = schemas.ErrorBody(category=exc.category, detail=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        cfg = parse_config(req.config.canonical_dict())
        return workflows.run_generate(cfg, force=req.force)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        cfg = parse_config(req.config.canonical_dict())
        return workflows.run_train(cfg, force=req.force)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        return workflows.run_evaluate(
            req.model_path, req.test_path, req.output_dir, req.method
        )

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(req: schemas.SweepRequest):
        cfg = parse_config(req.config.canonical_dict())
        return workflows.run_sweep(cfg, force=req.force)

    @app.post("/forecast", response_model=schemas.ForecastResponse)
    def forecast(req: schemas.ForecastRequest):
        return workflows.run_forecast(
            req.model_path,
            x0=req.x0,
            u0_path=req.u0_path,
            steps=req.steps,
            dt=req.dt,
            method=req.method,
            output_path=req.output_path,
        )

    return app


app = create_app()
