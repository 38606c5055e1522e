"""Rollout-based error metrics and model parameter counting.

``full_trajectory_rmse`` rolls each test trajectory out from its first
sample only (one rollout per trajectory); ``next_step_rmse`` teacher-forces
every step.  Divergent forecasts are reported as infinite error instead of
raising, so hyperparameter sweeps survive bad configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import integrate
from .errors import DivergenceError
from .ode import RockModel, TrajectorySet, forecast, stacked_field_fn


@dataclass
class EvalReport:
    """Aggregate and per-trajectory errors plus the model size."""

    err: float
    one_err: float
    per_trajectory: list = field(default_factory=list)
    model_size: int = 0

    def to_dict(self) -> dict:
        return {
            "err": self.err,
            "one_err": self.one_err,
            "per_trajectory": self.per_trajectory,
            "model_size": self.model_size,
        }

    def to_table(self) -> str:
        """Aligned-column text rendering."""
        rows = [("trajectory", "err", "one_err")]
        for i, entry in enumerate(self.per_trajectory):
            rows.append((str(i), f"{entry['err']:.6g}", f"{entry['one_err']:.6g}"))
        rows.append(("overall", f"{self.err:.6g}", f"{self.one_err:.6g}"))
        rows.append(("model_size", str(self.model_size), ""))
        widths = [max(len(r[c]) for r in rows) for c in range(3)]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows
        )


def parameter_count(n_blocks: int, p: int, d: int) -> int:
    """Model size after trajectory cutting: blocks x features x dimension."""
    return int(n_blocks) * int(p) * int(d)


def count_parameters(model) -> int:
    """Number of trainable parameters in a trained model."""
    if isinstance(model, RockModel):
        return parameter_count(model.test_block.n_blocks, model.p, model.d)
    if hasattr(model, "alpha"):
        return int(np.asarray(model.alpha).size)
    raise TypeError(f"cannot count parameters of {type(model).__name__}")


def _pooled_rmse(sq_sum: float, count: int) -> float:
    return float(np.sqrt(sq_sum / count)) if count else float("nan")


def _rollout_errors(model, group, method):
    """Squared rollout errors for trajectories sharing one time grid."""
    ts = group[0].ts
    x0 = np.stack([t.xs[:, 0] for t in group], axis=1)
    try:
        pred = forecast(model, x0, ts, method=method)  # (d, B, m)
        truth = np.stack([t.xs for t in group], axis=1)
        return np.sum((pred - truth) ** 2, axis=(0, 2))  # per trajectory
    except DivergenceError:
        if len(group) == 1:
            return np.array([np.inf])
        out = np.empty(len(group))
        for i, traj in enumerate(group):
            try:
                pred = forecast(model, traj.xs[:, 0], traj.ts, method=method)
                out[i] = np.sum((pred - traj.xs) ** 2)
            except DivergenceError:
                out[i] = np.inf
        return out


def full_trajectory_rmse(model, test: TrajectorySet, method=integrate.RK4) -> float:
    """RMSE of full rollouts, pooled over samples, dimensions, trajectories."""
    per, _ = _trajectory_sq_errors(model, test, method)
    counts = np.array([t.d * t.m for t in test], dtype=float)
    total = per.sum()
    if not np.isfinite(total):
        return float("inf")
    return _pooled_rmse(total, int(counts.sum()))


def _trajectory_sq_errors(model, test, method):
    per = np.empty(len(test))
    order = []
    groups = {}
    for i, traj in enumerate(test):
        key = traj.ts.tobytes()
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(i)
    for key in order:
        idx = groups[key]
        errs = _rollout_errors(model, [test[i] for i in idx], method)
        per[idx] = errs
    return per, groups


def next_step_rmse(model, test: TrajectorySet, method=integrate.RK4) -> float:
    """RMSE of one-step predictions from every observed sample."""
    sq = _next_step_sq_errors(model, test, method)
    total = float(sq.sum())
    if not np.isfinite(total):
        return float("inf")
    return _pooled_rmse(total, sq.size)


def _next_step_sq_errors(model, test, method):
    """Per-entry squared one-step errors, shape (d, total transitions)."""
    starts = np.concatenate([t.xs[:, :-1] for t in test], axis=1)
    targets = np.concatenate([t.xs[:, 1:] for t in test], axis=1)
    dts = np.concatenate([np.diff(t.ts) for t in test])
    pred = integrate.step(model.field_fn(), starts, dts, method)
    errs = pred - targets
    sq = errs * errs
    sq[~np.isfinite(sq)] = np.inf
    return sq


def evaluate(model, test: TrajectorySet, method=integrate.RK4) -> EvalReport:
    """Full report: pooled metrics plus per-trajectory breakdown."""
    per_sq, _ = _trajectory_sq_errors(model, test, method)
    step_sq = _next_step_sq_errors(model, test, method)
    per = []
    offset = 0
    for traj, sq in zip(test, per_sq):
        n_roll = traj.d * traj.m
        chunk = step_sq[:, offset : offset + traj.m - 1]
        offset += traj.m - 1
        chunk_total = float(chunk.sum())
        per.append(
            {
                "err": _pooled_rmse(sq, n_roll) if np.isfinite(sq) else float("inf"),
                "one_err": _pooled_rmse(chunk_total, chunk.size)
                if np.isfinite(chunk_total)
                else float("inf"),
            }
        )
    total_roll = float(per_sq.sum())
    total_step = float(step_sq.sum())
    err = (
        _pooled_rmse(total_roll, test.d * sum(t.m for t in test))
        if np.isfinite(total_roll)
        else float("inf")
    )
    one_err = (
        _pooled_rmse(total_step, step_sq.size)
        if np.isfinite(total_step)
        else float("inf")
    )
    return EvalReport(
        err=err,
        one_err=one_err,
        per_trajectory=per,
        model_size=count_parameters(model),
    )


def evaluate_many(models, test: TrajectorySet, method=integrate.RK4):
    """Evaluate sibling models (same kernel/training data) in one pass.

    All rollouts and one-step predictions are batched through a stacked
    field evaluation, which matters when scoring a regularization grid.  If
    the joint rollout diverges the models are scored individually, so one
    blown-up configuration cannot poison its siblings.
    """
    if len(models) == 1:
        return [evaluate(models[0], test, method)]
    try:
        return _evaluate_stacked(models, test, method)
    except DivergenceError:
        return [evaluate(m, test, method) for m in models]


def _evaluate_stacked(models, test, method):
    field = stacked_field_fn(models)
    count = len(models)
    per_sq = np.empty((count, len(test)))
    groups = {}
    order = []
    for i, traj in enumerate(test):
        key = traj.ts.tobytes()
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(i)
    for key in order:
        idx = groups[key]
        trajs = [test[i] for i in idx]
        width = len(trajs)
        x0 = np.stack([t.xs[:, 0] for t in trajs], axis=1)
        out = integrate.rollout(field, np.tile(x0, (1, count)), trajs[0].ts, method)
        truth = np.stack([t.xs for t in trajs], axis=1)
        for m in range(count):
            block = out[:, m * width : (m + 1) * width, :]
            per_sq[m, idx] = np.sum((block - truth) ** 2, axis=(0, 2))

    starts = np.concatenate([t.xs[:, :-1] for t in test], axis=1)
    targets = np.concatenate([t.xs[:, 1:] for t in test], axis=1)
    dts = np.concatenate([np.diff(t.ts) for t in test])
    width = starts.shape[1]
    pred = integrate.step(
        field, np.tile(starts, (1, count)), np.tile(dts, count), method
    )
    reports = []
    m_counts = [t.m for t in test]
    d = test.d
    for m, model in enumerate(models):
        sq_step = pred[:, m * width : (m + 1) * width] - targets
        sq_step = sq_step * sq_step
        sq_step[~np.isfinite(sq_step)] = np.inf
        per = []
        offset = 0
        for ti, mm in enumerate(m_counts):
            chunk = sq_step[:, offset : offset + mm - 1]
            offset += mm - 1
            chunk_total = float(chunk.sum())
            roll_sq = per_sq[m, ti]
            per.append(
                {
                    "err": _pooled_rmse(roll_sq, d * mm)
                    if np.isfinite(roll_sq)
                    else float("inf"),
                    "one_err": _pooled_rmse(chunk_total, chunk.size)
                    if np.isfinite(chunk_total)
                    else float("inf"),
                }
            )
        total_roll = float(per_sq[m].sum())
        total_step = float(sq_step.sum())
        reports.append(
            EvalReport(
                err=_pooled_rmse(total_roll, d * sum(m_counts))
                if np.isfinite(total_roll)
                else float("inf"),
                one_err=_pooled_rmse(total_step, sq_step.size)
                if np.isfinite(total_step)
                else float("inf"),
                per_trajectory=per,
                model_size=count_parameters(model),
            )
        )
    return reports
