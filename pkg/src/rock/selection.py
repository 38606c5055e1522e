"""Dataset splitting, trajectory cutting, and two-stage hyperparameter search.

The search runs a 60/20/20 trajectory-level split.  Stage 1 tunes (scale,
lambda) on the primary validation set for each (kernel, features, cut
length) combination, then picks the combination on the secondary validation
set.  Stage 2 retrains on the combined 80% and re-tunes only scale and
lambda against the secondary set.  Selection uses full-rollout error with
next-step error and parameter count as tiebreaks.  Single-trajectory
datasets are cut first and split by time order to avoid temporal leakage.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import integrate
from .errors import ConfigError, DataError, RockError, SearchError
from .kernels import FAMILIES, RANDOM_FOURIER, KernelSpec, RffConfig
from .metrics import count_parameters, evaluate, evaluate_many
from .ode import RockModel, Trajectory, TrajectorySet, assemble_gram, assemble_targets
from .solvers import RegularizedSystem, solve_regularized
from .test_space import build_test_block


@dataclass(frozen=True)
class SearchSpace:
    """Grids for the two-stage search."""

    kernels: tuple
    scales: tuple
    lambdas: tuple
    ps: tuple = (1,)
    cut_lengths: tuple = (None,)
    seed: int = 0
    rff_features: int = 256
    rff_period: float | None = None

    def __post_init__(self):
        for name, grid in (
            ("kernels", self.kernels),
            ("scales", self.scales),
            ("lambdas", self.lambdas),
            ("ps", self.ps),
            ("cut_lengths", self.cut_lengths),
        ):
            if len(grid) == 0:
                raise ConfigError(f"search grid {name!r} is empty")
            object.__setattr__(self, name, tuple(grid))
        for k in self.kernels:
            if k not in FAMILIES:
                raise ConfigError(f"unknown kernel family {k!r}")
        if any(s <= 0 for s in self.scales) or any(l <= 0 for l in self.lambdas):
            raise ConfigError("scales and lambdas must be positive")
        if any(p < 1 for p in self.ps):
            raise ConfigError("ps must be >= 1")
        if any(c is not None and c < 2 for c in self.cut_lengths):
            raise ConfigError("cut_lengths must be >= 2")


def split_dataset(data: TrajectorySet, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Random trajectory-level split into (train, val1, val2).

    Requires at least 5 trajectories; smaller datasets need manual splits
    (or the cut-then-split-by-time path of :func:`two_stage_search`).
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ConfigError("ratios must be three fractions summing to 1")
    n = len(data)
    if n < 5:
        raise DataError(
            f"only {n} trajectories; need >= 5 for an automatic split"
        )
    idx = np.random.default_rng(seed).permutation(n)
    n0 = int(round(ratios[0] * n))
    n1 = int(round(ratios[1] * n))
    n0 = min(max(n0, 1), n - 2)
    n1 = min(max(n1, 1), n - n0 - 1)
    parts = (idx[:n0], idx[n0 : n0 + n1], idx[n0 + n1 :])
    return tuple(data.subset(sorted(part.tolist())) for part in parts)


def cut_trajectories(data: TrajectorySet, length: int) -> TrajectorySet:
    """Split every trajectory into windows of ``length`` samples.

    Consecutive windows share their endpoint sample, so the union of the
    windows covers every original interval.  A final shorter window is kept
    when at least 2 samples remain.
    """
    if length is None:
        return data
    if length < 2:
        raise ConfigError("cut length must be >= 2")
    out = []
    for traj in data:
        m = traj.m
        for start in range(0, m - 1, length - 1):
            stop = min(start + length, m)
            out.append(Trajectory(ts=traj.ts[start:stop], xs=traj.xs[:, start:stop]))
    return TrajectorySet(tuple(out))


def median_pairwise_distance(
    data: TrajectorySet, max_samples: int = 500, seed: int = 0
) -> float:
    """Median pairwise distance of a random sample subset (scale heuristic)."""
    X = data.stacked_states()
    if X.shape[1] > max_samples:
        idx = np.random.default_rng(seed).choice(
            X.shape[1], size=max_samples, replace=False
        )
        X = X[:, np.sort(idx)]
    x2 = np.sum(X * X, axis=0)
    d2 = np.maximum(x2[:, None] + x2[None, :] - 2.0 * X.T @ X, 0.0)
    tri = d2[np.triu_indices(d2.shape[0], k=1)]
    med = float(np.sqrt(np.median(tri)))
    return med if med > 0 else 1.0


def default_scale_grid(data: TrajectorySet, n_points: int = 5, span: float = 10.0):
    """Log grid of kernel scales centered on the median pairwise distance."""
    center = median_pairwise_distance(data)
    return tuple(center * np.logspace(-np.log10(span) / 2, np.log10(span) / 2, n_points))


@dataclass
class SearchResult:
    best: dict
    model: RockModel
    entries: list = field(default_factory=list)


def _kernel_spec(space: SearchSpace, family: str, scale: float) -> KernelSpec:
    if family == RANDOM_FOURIER:
        return KernelSpec(
            family=family,
            scale=scale,
            rff=RffConfig(
                num_features=space.rff_features,
                period=space.rff_period,
                seed=space.seed,
            ),
        )
    return KernelSpec(family=family, scale=scale)


def _time_order_split(windows: TrajectorySet, ratios=(0.6, 0.2, 0.2)):
    n = len(windows)
    n0 = max(int(round(ratios[0] * n)), 1)
    n1 = max(int(round(ratios[1] * n)), 1)
    n0 = min(n0, n - 2)
    n1 = min(n1, n - n0 - 1)
    idx = list(range(n))
    return (
        windows.subset(idx[:n0]),
        windows.subset(idx[n0 : n0 + n1]),
        windows.subset(idx[n0 + n1 :]),
    )


def _fit_scale(train_set, tb, train_points, space, family, p, scale, method, val_set, stage, cut):
    """Train the lambda grid for one scale and score it on ``val_set``.

    The Gram matrix is assembled once and shared by every lambda; the
    resulting sibling models are scored with one batched evaluation.
    Returns (best, entries) with best = (key, scale, lam, model, report) or
    None if every lambda diverged.
    """
    entries = []
    record_base = {
        "stage": stage,
        "kernel": family,
        "p": p,
        "cut_length": cut,
        "scale": float(scale),
    }
    kernel = _kernel_spec(space, family, scale)
    try:
        G = assemble_gram(kernel, train_set, tb)
        Y = assemble_targets(train_set, tb)
    except RockError as exc:
        entries.append(dict(record_base, error=str(exc)))
        return None, entries
    fitted = []
    for lam in space.lambdas:
        try:
            coeffs = solve_regularized(RegularizedSystem(G, Y.T, lam))
        except RockError as exc:
            entries.append(dict(record_base, **{"lambda": float(lam)}, error=str(exc)))
            continue
        fitted.append(
            (
                lam,
                RockModel(
                    kernel=kernel,
                    lam=lam,
                    train_points=train_points,
                    test_block=tb,
                    coeffs=coeffs,
                ),
            )
        )
    if not fitted:
        return None, entries
    reports = evaluate_many([m for _, m in fitted], val_set, method)
    best = None
    for (lam, model), report in zip(fitted, reports):
        entries.append(
            dict(
                record_base,
                **{"lambda": float(lam)},
                err=report.err,
                one_err=report.one_err,
                size=report.model_size,
            )
        )
        if not np.isfinite(report.err):
            continue
        key = (report.err, report.one_err, report.model_size)
        if best is None or key < best[0]:
            best = (key, scale, lam, model, report)
    return best, entries


def _fit_grid(train_set, space, family, p, method, val_set, stage, cut, pool=None):
    """Run :func:`_fit_scale` over the scale grid and reduce.

    Scales run concurrently when a pool is given; results are reduced in
    grid order so logs and ties stay reproducible.
    """
    tb = build_test_block(train_set.ts_list(), p - 1)
    train_points = train_set.stacked_states()

    def task(scale):
        return _fit_scale(
            train_set, tb, train_points, space, family, p, scale,
            method, val_set, stage, cut,
        )

    if pool is None:
        results = [task(s) for s in space.scales]
    else:
        results = list(pool.map(task, space.scales))
    entries = []
    best = None
    for fit, scale_entries in results:
        entries.extend(scale_entries)
        if fit is not None and (best is None or fit[0] < best[0]):
            best = fit
    return best, entries


def two_stage_search(
    data: TrajectorySet,
    space: SearchSpace,
    method=integrate.RK4,
    n_workers: int | None = None,
) -> SearchResult:
    """Run the full two-stage hyperparameter selection.

    Returns the winning configuration, the final model trained on the
    combined train + primary-validation data, and the sweep log entries.
    Raises :class:`SearchError` if every configuration diverges.
    """
    entries = []
    pre_split = len(data) >= 5
    if pre_split:
        train, val1, val2 = split_dataset(data, seed=space.seed)

    def splits_for(cut):
        if pre_split:
            return cut_trajectories(train, cut), val1, val2
        return _time_order_split(cut_trajectories(data, cut))

    combos = list(itertools.product(space.kernels, space.ps, space.cut_lengths))

    if n_workers is None:
        # the BLAS layer already parallelizes the heavy products, so extra
        # Python workers are opt-in via ROCK_THREADS
        env = os.environ.get("ROCK_THREADS")
        n_workers = int(env) if env else 1
    n_workers = max(1, min(n_workers, len(space.scales), os.cpu_count() or 1))
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        stage1 = []
        for family, p, cut in combos:
            tr, v1, _ = splits_for(cut)
            fit, combo_entries = _fit_grid(
                tr, space, family, p, method, v1, 1, cut, pool=pool
            )
            entries.extend(combo_entries)
            stage1.append(fit)

        # pick the combination on the secondary validation set
        best_combo = None
        for combo, fit in zip(combos, stage1):
            if fit is None:
                continue
            family, p, cut = combo
            _, scale, lam, model, _ = fit
            _, _, v2 = splits_for(cut)
            report = evaluate(model, v2, method)
            entries.append(
                {
                    "stage": "1-select",
                    "kernel": family,
                    "p": p,
                    "cut_length": cut,
                    "scale": float(scale),
                    "lambda": float(lam),
                    "err": report.err,
                    "one_err": report.one_err,
                    "size": report.model_size,
                }
            )
            if not np.isfinite(report.err):
                continue
            key = (report.err, report.one_err, report.model_size)
            if best_combo is None or key < best_combo[0]:
                best_combo = (key, combo)
        if best_combo is None:
            raise SearchError(
                "every stage-1 configuration diverged", diagnostics=entries
            )

        # stage 2: retrain on the 80% split, re-tune scale and lambda only
        family, p, cut = best_combo[1]
        if pre_split:
            train80 = cut_trajectories(
                TrajectorySet(train.trajectories + val1.trajectories), cut
            )
            final_val = val2
        else:
            tr, v1, final_val = splits_for(cut)
            train80 = TrajectorySet(tr.trajectories + v1.trajectories)
        fit, stage2_entries = _fit_grid(
            train80, space, family, p, method, final_val, 2, cut, pool=pool
        )
        entries.extend(stage2_entries)
        if fit is None:
            raise SearchError(
                "every stage-2 configuration diverged", diagnostics=entries
            )
    finally:
        if pool is not None:
            pool.shutdown()
    _, scale, lam, model, report = fit
    best = {
        "kernel": family,
        "scale": float(scale),
        "lambda": float(lam),
        "p": int(p),
        "cut_length": cut,
        "val_err": report.err,
        "val_one_err": report.one_err,
        "model_size": count_parameters(model),
    }
    return SearchResult(best=best, model=model, entries=entries)
