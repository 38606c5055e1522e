"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..config import ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    category: str
    detail: str


class GenerateRequest(BaseModel):
    config: ExperimentConfig
    force: bool = False


class GenerateResponse(BaseModel):
    run_dir: str
    dataset_dir: str
    manifest: dict
    cached: bool


class TrainRequest(BaseModel):
    config: ExperimentConfig
    force: bool = False


class TrainResponse(BaseModel):
    run_dir: str
    model_path: str
    summary: dict
    cached: bool


class EvaluateRequest(BaseModel):
    model_path: str
    test_path: str
    output_dir: Optional[str] = None
    method: str = "rk4"


class EvaluateResponse(BaseModel):
    report: dict
    table: str
    report_json: Optional[str] = None
    report_table: Optional[str] = None


class SweepRequest(BaseModel):
    config: ExperimentConfig
    force: bool = False


class SweepResponse(BaseModel):
    run_dir: str
    model_path: str
    log_path: str
    best: dict
    cached: bool


class ForecastRequest(BaseModel):
    model_path: str
    x0: Optional[list[float]] = None
    u0_path: Optional[str] = None
    steps: int = Field(default=100, ge=0)
    dt: Optional[float] = Field(default=None, gt=0)
    method: str = "rk4"
    output_path: Optional[str] = None


class ForecastResponse(BaseModel):
    kind: str
    t_final: float
    final_state: Optional[list[float]] = None
    output_path: Optional[str] = None
