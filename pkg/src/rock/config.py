"""Experiment configuration schema and loading.

Configs are JSON files validated with pydantic.  Relative paths are resolved
against the config file's directory, and referenced dataset files must exist
at load time.  A canonical hash of the resolved config keys each run's
output directory, making re-runs of an identical config a no-op.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, StorageError
from .kernels import KernelSpec, RffConfig
from .pde import FeatureSpec
from .systems import SYSTEMS, SystemSpec


class RffSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_features: int = Field(ge=1)
    period: Optional[float] = Field(default=None, gt=0)
    seed: int = 0


class KernelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["gaussian", "laplace", "matern10", "random_fourier"]
    scale: float = Field(gt=0)
    rff: Optional[RffSection] = None

    def to_spec(self) -> KernelSpec:
        rff = None
        if self.rff is not None:
            rff = RffConfig(
                num_features=self.rff.num_features,
                period=self.rff.period,
                seed=self.rff.seed,
            )
        return KernelSpec(family=self.family, scale=self.scale, rff=rff)


class FeatureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["polynomial", "random_fourier"] = "polynomial"
    max_order: int = Field(default=2, ge=1)
    degree: int = Field(default=2, ge=1, le=3)
    num_features: int = Field(default=200, ge=1)
    scale: float = Field(default=1.0, gt=0)
    period: Optional[float] = Field(default=None, gt=0)
    seed: int = 0

    def to_spec(self) -> FeatureSpec:
        return FeatureSpec(
            kind=self.kind,
            max_order=self.max_order,
            degree=self.degree,
            num_features=self.num_features,
            scale=self.scale,
            period=self.period,
            seed=self.seed,
        )


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: str
    params: dict = Field(default_factory=dict)
    dim: Optional[int] = None
    n_traj: int = Field(default=1, ge=1)
    samples_per_traj: int = Field(ge=2)
    dt: float = Field(gt=0)
    transient: float = Field(default=0.0, ge=0)
    noise_std: float = Field(default=0.0, ge=0)
    substeps: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _known_system(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        return self

    def to_spec(self, seed: int) -> SystemSpec:
        return SystemSpec(
            name=self.system,
            params=self.params,
            dim=self.dim,
            noise_std=self.noise_std,
            seed=seed,
        )


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    generator: Optional[GeneratorConfig] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("dataset needs exactly one of 'path' or 'generator'")
        return self


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["ode", "pde"] = "ode"
    kernel: Optional[KernelConfig] = None
    features: Optional[FeatureConfig] = None
    lam: float = Field(default=1e-6, gt=0, alias="lambda")
    p: int = Field(default=1, ge=1)
    cut_length: Optional[int] = Field(default=None, ge=2)
    coarsen: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind == "ode" and self.kernel is None:
            raise ValueError("ode models require a 'kernel' section")
        if self.kind == "pde" and self.features is None:
            raise ValueError("pde models require a 'features' section")
        return self


class SearchSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kernels: list[Literal["gaussian", "laplace", "matern10", "random_fourier"]] = (
        Field(default_factory=lambda: ["gaussian"])
    )
    scales: Optional[list[float]] = None
    lambdas: list[float] = Field(default_factory=lambda: [1e-8, 1e-6, 1e-4])
    ps: list[int] = Field(default_factory=lambda: [1])
    cut_lengths: list[Optional[int]] = Field(default_factory=lambda: [None])
    seed: int = 0
    rff_features: int = Field(default=256, ge=2)
    rff_period: Optional[float] = Field(default=None, gt=0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    dataset: DatasetConfig
    model: Optional[ModelSection] = None
    search: Optional[SearchSection] = None
    output_dir: str = "runs"
    seed: int = 0

    def canonical_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def config_hash(config: ExperimentConfig, command: str) -> str:
    """Short stable hash of (command, resolved config)."""
    blob = json.dumps(
        {"command": command, "config": config.canonical_dict()},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(payload: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a config dict; resolves and checks dataset paths."""
    try:
        cfg = ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_validation_error(exc)}") from None
    if cfg.dataset.path is not None:
        path = Path(cfg.dataset.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise StorageError(f"dataset path does not exist: {path}")
        cfg.dataset.path = str(path)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise StorageError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(payload, base_dir=path.parent)
