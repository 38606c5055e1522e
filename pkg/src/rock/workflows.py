"""Config-driven pipeline stages shared by the service endpoints.

Every stage writes its artifacts under ``output_dir/<command>-<hash>`` where
the hash covers the command and the resolved config; rerunning an identical
config returns the cached result unless forced.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__, metrics, selection, storage
from .config import ExperimentConfig, config_hash
from .errors import ConfigError, DataError
from .ode import RockModel, TrajectorySet, forecast
from .ode import train as train_ode
from .pde import FieldGrid, PdeModel, forecast_pde, train_pde
from .selection import SearchSpace, cut_trajectories, default_scale_grid
from .systems import generate


def _run_dir(cfg: ExperimentConfig, command: str) -> Path:
    return Path(cfg.output_dir) / f"{command}-{config_hash(cfg, command)}"


def _cached(run_dir: Path, force: bool):
    marker = run_dir / "result.json"
    if marker.exists() and not force:
        result = json.loads(marker.read_text(encoding="utf-8"))
        result["cached"] = True
        return result
    return None


def _finish(run_dir: Path, result: dict) -> dict:
    result["cached"] = False
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "result.json").write_text(
        json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return result


def _load_dataset(cfg: ExperimentConfig):
    if cfg.dataset.path is not None:
        data, _ = storage.read_dataset(cfg.dataset.path)
        return data
    gen = cfg.dataset.generator
    spec = gen.to_spec(cfg.seed)
    return generate(
        spec,
        n_traj=gen.n_traj,
        samples_per_traj=gen.samples_per_traj,
        dt=gen.dt,
        transient=gen.transient,
        seed=cfg.seed,
        substeps=gen.substeps,
    )


def run_generate(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Generate a dataset from the config's generator section."""
    if cfg.dataset.generator is None:
        raise ConfigError("generate requires a dataset.generator section")
    run_dir = _run_dir(cfg, "generate")
    cached = _cached(run_dir, force)
    if cached:
        return cached
    data = _load_dataset(cfg)
    gen = cfg.dataset.generator
    dataset_dir = run_dir / "dataset"
    manifest = storage.write_dataset(
        dataset_dir,
        data,
        {
            "system": gen.system,
            "params": {k: v for k, v in gen.to_spec(cfg.seed).params.items()},
            "seed": cfg.seed,
            "noise_std": gen.noise_std,
            "dt": gen.dt,
            "transient": gen.transient,
            "version": __version__,
        },
    )
    return _finish(
        run_dir,
        {
            "run_dir": str(run_dir),
            "dataset_dir": str(dataset_dir),
            "manifest": manifest,
        },
    )


def _train_from_config(cfg: ExperimentConfig):
    if cfg.model is None:
        raise ConfigError("train requires a model section")
    data = _load_dataset(cfg)
    section = cfg.model
    if section.kind == "ode":
        if not isinstance(data, TrajectorySet):
            raise DataError("ode model requires trajectory data")
        if section.cut_length is not None:
            data = cut_trajectories(data, section.cut_length)
        model = train_ode(data, section.kernel.to_spec(), section.lam, section.p)
    else:
        if not isinstance(data, FieldGrid):
            raise DataError("pde model requires field-grid data")
        model = train_pde(
            data, section.features.to_spec(), section.lam, section.coarsen
        )
    return model, data


def run_train(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Train a model and store it in the binary container format."""
    run_dir = _run_dir(cfg, "train")
    cached = _cached(run_dir, force)
    if cached:
        return cached
    model, data = _train_from_config(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    model_path = run_dir / "model.rock"
    storage.save_model(model_path, model)
    summary = {
        "kind": cfg.model.kind,
        "parameters": metrics.count_parameters(model),
        "lambda": cfg.model.lam,
    }
    if isinstance(model, RockModel):
        summary["n_blocks"] = model.test_block.n_blocks
        summary["p"] = model.p
        summary["d"] = model.d
    else:
        summary["features"] = model.feature_spec.names()
        summary["alpha"] = [float(a) for a in model.alpha]
    (run_dir / "train_log.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return _finish(
        run_dir,
        {"run_dir": str(run_dir), "model_path": str(model_path), "summary": summary},
    )


def run_evaluate(
    model_path, test_path, output_dir=None, method: str = "rk4"
) -> dict:
    """Evaluate a stored ODE model on a stored test dataset."""
    model = storage.load_model(model_path)
    if not isinstance(model, RockModel):
        raise ConfigError("evaluate currently supports ode models")
    data, _ = storage.read_dataset(test_path)
    if not isinstance(data, TrajectorySet):
        raise DataError("evaluate requires trajectory test data")
    report = metrics.evaluate(model, data, method)
    result = {"report": report.to_dict(), "table": report.to_table()}
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (out / "report.txt").write_text(report.to_table() + "\n", encoding="utf-8")
        result["report_json"] = str(out / "report.json")
        result["report_table"] = str(out / "report.txt")
    return result


def run_sweep(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Two-stage hyperparameter search; stores the winning model and log."""
    if cfg.search is None:
        raise ConfigError("sweep requires a search section")
    run_dir = _run_dir(cfg, "sweep")
    cached = _cached(run_dir, force)
    if cached:
        return cached
    data = _load_dataset(cfg)
    if not isinstance(data, TrajectorySet):
        raise DataError("sweep requires trajectory data")
    scales = cfg.search.scales
    if scales is None:
        scales = default_scale_grid(data)
    space = SearchSpace(
        kernels=tuple(cfg.search.kernels),
        scales=tuple(scales),
        lambdas=tuple(cfg.search.lambdas),
        ps=tuple(cfg.search.ps),
        cut_lengths=tuple(cfg.search.cut_lengths),
        seed=cfg.search.seed,
        rff_features=cfg.search.rff_features,
        rff_period=cfg.search.rff_period,
    )
    result = selection.two_stage_search(data, space)
    run_dir.mkdir(parents=True, exist_ok=True)
    model_path = run_dir / "model.rock"
    storage.save_model(model_path, result.model)
    log_path = run_dir / "sweep_log.jsonl"
    with log_path.open("w", encoding="utf-8") as fh:
        for entry in result.entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return _finish(
        run_dir,
        {
            "run_dir": str(run_dir),
            "model_path": str(model_path),
            "log_path": str(log_path),
            "best": result.best,
        },
    )


def run_forecast(
    model_path,
    x0=None,
    u0_path=None,
    steps: int = 100,
    dt: float | None = None,
    method: str = "rk4",
    output_path=None,
) -> dict:
    """Roll a stored model forward and write the forecast as CSV."""
    model = storage.load_model(model_path)
    if isinstance(model, RockModel):
        if x0 is None:
            raise ConfigError("ode forecast requires an initial state x0")
        if dt is None or dt <= 0:
            raise ConfigError("forecast requires a positive dt")
        x0 = np.asarray(x0, dtype=float)
        t_grid = dt * np.arange(steps + 1)
        traj = forecast(model, x0, t_grid, method=method)
        result = {
            "kind": "ode",
            "t_final": float(t_grid[-1]),
            "final_state": [float(v) for v in traj[:, -1]],
        }
        if output_path is not None:
            storage.write_trajectory_csv(output_path, t_grid, traj)
            result["output_path"] = str(output_path)
        return result
    if isinstance(model, PdeModel):
        if u0_path is None:
            raise ConfigError("pde forecast requires an initial profile file u0")
        if dt is None or dt <= 0:
            raise ConfigError("forecast requires a positive dt")
        u0_path = Path(u0_path)
        has_mesh = True
        if u0_path.is_dir():
            grid, _ = storage.read_dataset(u0_path)
        else:
            try:
                grid = storage.load_field(u0_path)
            except DataError:
                # bare CSV carries no coordinates; trust the model's mesh
                grid = storage.read_field_csv(u0_path)
                has_mesh = False
        if not isinstance(grid, FieldGrid):
            raise DataError("u0 must reference field-grid data")
        if has_mesh:
            dx_in = grid.xs[1] - grid.xs[0]
            if abs(dx_in - model.dx) <= 1e-6 * model.dx:
                u0, xs_c = grid.u[-1], grid.xs
            elif abs(dx_in * model.coarsen - model.dx) <= 1e-6 * model.dx:
                u0 = grid.u[-1][:: model.coarsen]
                xs_c = grid.xs[:: model.coarsen]
            else:
                raise DataError(
                    "initial profile mesh spacing does not match the model"
                )
            t0 = grid.ts[-1]
        else:
            u0 = grid.u[-1]
            xs_c = model.dx * np.arange(u0.size)
            t0 = grid.ts[-1]
        out = forecast_pde(model, u0, dt, steps)
        ts = t0 + dt * np.arange(steps + 1)
        result = {"kind": "pde", "t_final": float(ts[-1])}
        if output_path is not None:
            storage.write_field_csv(
                output_path,
                FieldGrid(u=out, ts=ts, xs=xs_c, periodic=model.periodic),
            )
            result["output_path"] = str(output_path)
        return result
    raise ConfigError("unsupported model type")  # pragma: no cover
