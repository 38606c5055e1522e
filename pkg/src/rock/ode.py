"""Occupation-kernel regression for ODE vector fields.

Training matches weak-form integrals of the unknown field against Legendre
test features along each trajectory.  Targets use the integration-by-parts
form (boundary values minus an integral against the feature derivatives), so
no derivative estimates of the data are ever needed -- the main reason the
method tolerates noisy samples.  With the separable kernel the coefficient
system is ``(G + lambda I) A = Y`` with one right-hand-side column per state
dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import integrate
from .errors import ConfigError, DataError, ShapeError
from .kernels import GAUSSIAN, RANDOM_FOURIER, KernelSpec, _profile, gram, rff_features
from .solvers import RegularizedSystem, solve_regularized
from .test_space import TestBlock, build_test_block


@dataclass(frozen=True)
class Trajectory:
    """One sampled trajectory: times ``ts`` (m,) and states ``xs`` (d, m)."""

    ts: np.ndarray
    xs: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[None, :]
        if ts.ndim != 1:
            raise ShapeError("ts must be one-dimensional")
        if ts.size < 2:
            raise DataError("trajectory too short: need at least 2 samples")
        if np.any(np.diff(ts) <= 0):
            raise DataError("sample times must be strictly increasing")
        if xs.ndim != 2 or xs.shape[1] != ts.size:
            raise ShapeError("xs must be d x m with one column per sample")
        if not np.all(np.isfinite(xs)):
            raise DataError("trajectory states contain non-finite values")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "xs", xs)

    @property
    def d(self) -> int:
        return self.xs.shape[0]

    @property
    def m(self) -> int:
        return self.ts.size


@dataclass(frozen=True)
class TrajectorySet:
    """A collection of trajectories sharing one state dimension."""

    trajectories: tuple

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise DataError("empty trajectory set")
        trajs = tuple(
            t if isinstance(t, Trajectory) else Trajectory(*t) for t in trajs
        )
        d = trajs[0].d
        if any(t.d != d for t in trajs):
            raise ShapeError("all trajectories must share the state dimension")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]

    @property
    def d(self) -> int:
        return self.trajectories[0].d

    @property
    def total_samples(self) -> int:
        return sum(t.m for t in self.trajectories)

    def ts_list(self):
        return [t.ts for t in self.trajectories]

    def stacked_states(self) -> np.ndarray:
        """All samples as one d x (sum m_i) matrix, trajectory-ordered."""
        return np.concatenate([t.xs for t in self.trajectories], axis=1)

    def subset(self, indices) -> "TrajectorySet":
        return TrajectorySet(tuple(self.trajectories[i] for i in indices))


@dataclass(frozen=True)
class RockModel:
    """Trained vector-field model.

    ``coeffs`` has one row per (trajectory block, feature) pair and one
    column per state dimension; evaluation pairs it with the kernel values
    between ``train_points`` and the query through ``test_block.qphi``.
    """

    kernel: KernelSpec
    lam: float
    train_points: np.ndarray  # (d, total_samples)
    test_block: TestBlock
    coeffs: np.ndarray  # (n_blocks * p, d)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        expected = self.test_block.n_blocks * self.test_block.p
        if self.coeffs.shape[0] != expected:
            raise ShapeError(
                f"coeffs must have {expected} rows, got {self.coeffs.shape[0]}"
            )
        if self.train_points.shape[1] != self.test_block.total_samples:
            raise ShapeError(
                "train_points column count must match the test block samples"
            )

    @property
    def d(self) -> int:
        return self.train_points.shape[0]

    @property
    def p(self) -> int:
        return self.test_block.p

    def field_fn(self):
        """Closure evaluating the learned field, for the integrators."""
        return lambda X: eval_vector_field(self, X)


def _check_block(data: TrajectorySet, tb: TestBlock):
    if tb.total_samples != data.total_samples or tb.n_blocks != len(data):
        raise ShapeError(
            "test block was not built from this trajectory set "
            f"({tb.n_blocks} blocks / {tb.total_samples} samples vs "
            f"{len(data)} / {data.total_samples})"
        )


def assemble_gram(kernel: KernelSpec, data: TrajectorySet, tb: TestBlock):
    """Quadrature approximation of the pairwise occupation inner products.

    Equals ``qphi @ K @ qphi.T`` where K is the scalar Gram matrix of all
    flattened samples; symmetrized to remove matmul round-off.
    """
    _check_block(data, tb)
    X = data.stacked_states()
    if kernel.family == RANDOM_FOURIER:
        B = tb.qphi @ rff_features(kernel, X).T
        G = B @ B.T
    else:
        K = gram(kernel, X, X)
        G = tb.qphi @ K @ tb.qphi.T
    return (G + G.T) / 2.0


def assemble_targets(data: TrajectorySet, tb: TestBlock) -> np.ndarray:
    """Integration-by-parts targets, returned as d x (n_blocks * p).

    Row block i is ``x_i(b) psi_i(b) - x_i(a) psi_i(a) - int x_i psi_i' dt``,
    which ``qphid`` encodes exactly, so this is one matrix product.
    """
    _check_block(data, tb)
    return data.stacked_states() @ tb.qphid.T


def train(data: TrajectorySet, kernel: KernelSpec, lam: float, p: int) -> RockModel:
    """Fit the vector field on a trajectory set.

    Parameters
    ----------
    data : TrajectorySet
    kernel : KernelSpec
    lam : float
        Ridge regularization strength (> 0).
    p : int
        Number of Legendre test features per trajectory (>= 1).
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    if not lam > 0:
        raise ConfigError("lambda must be positive")
    tb = build_test_block(data.ts_list(), p - 1)
    G = assemble_gram(kernel, data, tb)
    Y = assemble_targets(data, tb)
    coeffs = solve_regularized(RegularizedSystem(G, Y.T, lam))
    return RockModel(
        kernel=kernel,
        lam=lam,
        train_points=data.stacked_states(),
        test_block=tb,
        coeffs=coeffs,
    )


def _eval_operator(model: RockModel) -> np.ndarray:
    # forecasting evaluates the field thousands of times, so the constant
    # d x samples operator (coeffs' qphi) and the train norms are cached
    W = model._cache.get("W")
    if W is None:
        if model.kernel.family == RANDOM_FOURIER:
            W = model.coeffs.T @ (
                model.test_block.qphi
                @ rff_features(model.kernel, model.train_points).T
            )
        else:
            W = model.coeffs.T @ model.test_block.qphi
            model._cache["x2"] = np.sum(
                model.train_points * model.train_points, axis=0
            )
        model._cache["W"] = W
    return W


def _query_features(model: RockModel, Xq) -> np.ndarray:
    """Kernel values (or RFF features) between the training samples and Xq."""
    if model.kernel.family == RANDOM_FOURIER:
        return rff_features(model.kernel, Xq)
    d2 = -2.0 * (model.train_points.T @ Xq)
    d2 += model._cache["x2"][:, None]
    d2 += np.sum(Xq * Xq, axis=0)[None, :]
    np.maximum(d2, 0.0, out=d2)
    if model.kernel.family == GAUSSIAN:
        d2 *= -1.0 / (2.0 * model.kernel.scale**2)
        return np.exp(d2, out=d2)
    return _profile(model.kernel, np.sqrt(d2, out=d2), overwrite=True)


def eval_vector_field(model: RockModel, Xq) -> np.ndarray:
    """Evaluate the learned field at query columns; returns (d, M).

    Equals ``coeffs' (qphi gram(kernel, train_points, Xq))``, computed with
    the cached evaluation operator.
    """
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None]
    if Xq.shape[0] != model.d:
        raise ShapeError(
            f"query points have dimension {Xq.shape[0]}, model has {model.d}"
        )
    W = _eval_operator(model)
    return W @ _query_features(model, Xq)


def stacked_field_fn(models):
    """Joint field closure for models sharing kernel and training data.

    The input state matrix must hold ``len(models)`` equal-width column
    groups, one per model; the kernel features of all groups are computed in
    one pass and each model's operator is applied to its own group.  Used to
    score a regularization grid with a single batched rollout.
    """
    base = models[0]
    for m in models[1:]:
        if m.kernel != base.kernel or (
            m.train_points is not base.train_points
            and not np.array_equal(m.train_points, base.train_points)
        ):
            raise ShapeError("stacked evaluation needs sibling models")
    ws = [_eval_operator(m) for m in models]
    count = len(models)
    d = base.d

    def field(X):
        width = X.shape[1] // count
        K = _query_features(base, X)
        out = np.empty((d, X.shape[1]))
        for i, w in enumerate(ws):
            cols = slice(i * width, (i + 1) * width)
            out[:, cols] = w @ K[:, cols]
        return out

    return field


def forecast(model: RockModel, x0, t_grid, method=integrate.RK4) -> np.ndarray:
    """Integrate the learned field from ``x0`` over ``t_grid``.

    ``x0`` may be a single state (d,) or a batch (d, B) sharing the grid.
    Raises :class:`DivergenceError` with the blow-up time on NaN/overflow.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[0] != model.d:
        raise ShapeError("initial state dimension does not match the model")
    return integrate.rollout(model.field_fn(), x0, t_grid, method=method)
