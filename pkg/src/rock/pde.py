"""Explicit-feature regression for evolution PDEs ``u_t = f(u, u_x, u_xx, ...)``.

Spatial derivatives are estimated by second-order finite differences on an
optionally coarsened mesh (coarsening smooths derivative noise).  For each
time interval the feature integral is a two-point trapezoid, the target is
the increment ``u(t_{j+1}) - u(t_j)``, and the coefficients solve the q x q
normal system ``(Phi Phi' + lambda I) alpha = Phi y``.  Forecasts use the
explicit Euler method with the same stencils.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .kernels import RANDOM_FOURIER, KernelSpec, RffConfig, rff_features
from .solvers import RegularizedSystem, solve_regularized

POLYNOMIAL = "polynomial"

#: forecast blow-up threshold on max |u|
BLOWUP_LIMIT = 1e6


@dataclass(frozen=True)
class FieldGrid:
    """Space-time samples of a scalar field on a uniform spatial mesh.

    ``u`` is (M, N): row j holds u(ts[j], xs).  ``periodic`` selects wrapped
    stencils; otherwise one-sided second-order stencils are used at the
    boundaries.
    """

    u: np.ndarray
    ts: np.ndarray
    xs: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        ts = np.asarray(self.ts, dtype=float)
        xs = np.asarray(self.xs, dtype=float)
        if u.ndim != 2:
            raise ShapeError("u must be an M x N matrix")
        if ts.shape != (u.shape[0],) or xs.shape != (u.shape[1],):
            raise ShapeError("ts/xs lengths must match the u grid")
        if u.shape[0] < 2 or u.shape[1] < 3:
            raise DataError("field grid needs at least 2 times and 3 points")
        if np.any(np.diff(ts) <= 0):
            raise DataError("ts must be strictly increasing")
        dx = np.diff(xs)
        if np.any(dx <= 0):
            raise DataError("xs must be strictly increasing")
        if np.abs(dx - dx[0]).max() > 1e-10 * abs(dx[0]):
            raise DataError("spatial mesh must be uniform")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "xs", xs)

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])


@dataclass(frozen=True)
class FeatureSpec:
    """Feature map over the derivative stack (u, u_x, ..., u_x^(D)).

    ``polynomial`` uses all monomials of total degree <= ``degree`` (constant
    included) in the D + 1 stack values.  ``random_fourier`` uses Gaussian
    random Fourier features of the stack with ``num_features`` outputs and
    optional periodic wrapping of the inputs with period ``period``.
    """

    kind: str = POLYNOMIAL
    max_order: int = 2
    degree: int = 2
    num_features: int = 200
    scale: float = 1.0
    period: float | None = None
    seed: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if self.kind not in (POLYNOMIAL, RANDOM_FOURIER):
            raise ConfigError(f"unknown feature kind {self.kind!r}")
        if self.max_order < 1:
            raise ConfigError("max_order must be >= 1")
        if self.kind == POLYNOMIAL and not 1 <= self.degree <= 3:
            raise ConfigError("polynomial degree must be 1, 2, or 3")
        if self.kind == RANDOM_FOURIER and self.num_features < 1:
            raise ConfigError("num_features must be >= 1")

    @property
    def n_inputs(self) -> int:
        return self.max_order + 1

    def _exponents(self):
        with self._lock:
            exps = self._cache.get("exponents")
            if exps is None:
                exps = monomial_exponents(self.n_inputs, self.degree)
                self._cache["exponents"] = exps
        return exps

    def _rff_kernel(self) -> KernelSpec:
        with self._lock:
            spec = self._cache.get("kernel")
            if spec is None:
                spec = KernelSpec(
                    family=RANDOM_FOURIER,
                    scale=self.scale,
                    rff=RffConfig(
                        num_features=self.num_features,
                        period=self.period,
                        seed=self.seed,
                    ),
                )
                self._cache["kernel"] = spec
        return spec

    @property
    def q(self) -> int:
        """Feature dimension."""
        if self.kind == POLYNOMIAL:
            return len(self._exponents())
        return self.num_features

    def names(self):
        """Human-readable feature labels (polynomial kind only)."""
        if self.kind != POLYNOMIAL:
            return [f"rff_{i}" for i in range(self.num_features)]
        vars_ = ["u"] + ["u_" + "x" * k for k in range(1, self.n_inputs)]
        labels = []
        for exp in self._exponents():
            parts = [
                v if e == 1 else f"{v}^{e}"
                for v, e in zip(vars_, exp)
                if e > 0
            ]
            labels.append("*".join(parts) if parts else "1")
        return labels


def monomial_exponents(n_vars: int, degree: int):
    """All exponent tuples with total degree <= degree, graded order."""
    exps = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), total):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            exps.append(tuple(e))
    return exps


def eval_features(spec: FeatureSpec, V) -> np.ndarray:
    """Apply the feature map to a stack of input rows.

    Parameters
    ----------
    V : (n_inputs, M) array
        Row k holds the k-th spatial derivative values at M points.

    Returns
    -------
    (q, M) array.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != spec.n_inputs:
        raise ShapeError(
            f"feature input needs {spec.n_inputs} rows, got {V.shape[0]}"
        )
    if spec.kind == RANDOM_FOURIER:
        return rff_features(spec._rff_kernel(), V)
    out = np.empty((spec.q, V.shape[1]))
    for i, exp in enumerate(spec._exponents()):
        row = np.ones(V.shape[1])
        for v, e in enumerate(exp):
            if e:
                row = row * V[v] ** e
        out[i] = row
    return out


def _first_derivative(u: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """Second-order d/dx along the last axis of an (..., N) array."""
    if periodic:
        return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2.0 * h)
    return np.gradient(u, h, axis=-1, edge_order=2)


def derivative_stack(u: np.ndarray, h: float, periodic: bool, max_order: int):
    """Stack (u, u_x, ..., u_x^(max_order)) by composing the first-derivative
    stencil; shape (max_order + 1,) + u.shape."""
    out = np.empty((max_order + 1,) + u.shape)
    out[0] = u
    for k in range(1, max_order + 1):
        out[k] = _first_derivative(out[k - 1], h, periodic)
    return out


def spatial_derivatives(grid: FieldGrid, max_order: int, coarsen: int = 1):
    """Finite-difference derivatives on the coarsened mesh.

    Returns
    -------
    (xs_c, stack) where ``xs_c`` is the coarsened mesh and ``stack`` has
    shape (max_order + 1, M, N') with the field and its first ``max_order``
    spatial derivatives.
    """
    if coarsen < 1:
        raise ConfigError("coarsen stride must be >= 1")
    if max_order < 1:
        raise ConfigError("max_order must be >= 1")
    n = grid.xs.size
    if grid.periodic and n % coarsen != 0:
        raise DataError(
            f"periodic grid of {n} points cannot be coarsened by {coarsen}"
        )
    xs_c = grid.xs[::coarsen]
    u_c = grid.u[:, ::coarsen]
    if xs_c.size < 2 * max_order + 1:
        raise DataError(
            f"coarsened grid too small: {xs_c.size} points for "
            f"order-{max_order} derivatives"
        )
    h = grid.dx * coarsen
    return xs_c, derivative_stack(u_c, h, grid.periodic, max_order)


@dataclass(frozen=True)
class PdeModel:
    """Trained PDE right-hand side ``f = alpha' phi(u, u_x, ...)``.

    Carries the coarsened mesh spacing and periodicity so a forecast applies
    exactly the stencils used during training.
    """

    feature_spec: FeatureSpec
    alpha: np.ndarray
    lam: float
    coarsen: int
    dx: float
    periodic: bool
    fd_scheme: int = 2

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        if alpha.size != self.feature_spec.q:
            raise ShapeError("alpha length must equal the feature dimension")
        object.__setattr__(self, "alpha", alpha)

    def rhs(self, u: np.ndarray) -> np.ndarray:
        """Evaluate f on a spatial profile (or a batch of rows)."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        stack = derivative_stack(
            np.atleast_2d(u), self.dx, self.periodic, self.feature_spec.max_order
        )
        m, n = stack.shape[1], stack.shape[2]
        feats = eval_features(self.feature_spec, stack.reshape(stack.shape[0], -1))
        out = (self.alpha @ feats).reshape(m, n)
        return out[0] if single else out


def assemble_pde_system(grid: FieldGrid, derivs: np.ndarray, feature_spec: FeatureSpec):
    """Build the feature-integral matrix and increment targets.

    Returns
    -------
    (Phi, y) : Phi is (q, N' * (M - 1)) with column (j, i) the two-point
    trapezoid integral of the features over [t_j, t_{j+1}] at space index i;
    y holds the matching increments ``u(t_{j+1}, x_i) - u(t_j, x_i)``.
    """
    derivs = np.asarray(derivs, dtype=float)
    if derivs.ndim != 3 or derivs.shape[1] != grid.ts.size:
        raise ShapeError("derivative stack does not match the grid times")
    if not np.all(np.isfinite(derivs)):
        raise DataError("derivative stack contains non-finite values")
    n_ord, m, n_sp = derivs.shape
    feats = eval_features(feature_spec, derivs.reshape(n_ord, m * n_sp))
    feats = feats.reshape(feature_spec.q, m, n_sp)
    dt = np.diff(grid.ts)
    # trapezoid over each interval, columns ordered time-major
    phi = 0.5 * dt[None, :, None] * (feats[:, :-1, :] + feats[:, 1:, :])
    u_c = derivs[0]
    y = (u_c[1:, :] - u_c[:-1, :]).reshape(-1)
    return phi.reshape(feature_spec.q, -1), y


def train_pde(
    grid: FieldGrid, feature_spec: FeatureSpec, lam: float, coarsen: int = 4
) -> PdeModel:
    """Fit the PDE right-hand side on a field grid."""
    if not lam > 0:
        raise ConfigError("lambda must be positive")
    xs_c, derivs = spatial_derivatives(grid, feature_spec.max_order, coarsen)
    phi, y = assemble_pde_system(
        FieldGrid(u=derivs[0], ts=grid.ts, xs=xs_c, periodic=grid.periodic),
        derivs,
        feature_spec,
    )
    A = phi @ phi.T
    A = (A + A.T) / 2.0
    alpha = solve_regularized(RegularizedSystem(A, phi @ y, lam)).ravel()
    return PdeModel(
        feature_spec=feature_spec,
        alpha=alpha,
        lam=lam,
        coarsen=coarsen,
        dx=float(xs_c[1] - xs_c[0]),
        periodic=grid.periodic,
    )


def forecast_pde(model: PdeModel, u0, dt: float, steps: int) -> np.ndarray:
    """Explicit-Euler rollout of the learned PDE from a spatial profile.

    Returns a (steps + 1, N') array whose first row is ``u0``.  Raises
    :class:`DivergenceError` with the step index once ``max |u|`` exceeds
    ``BLOWUP_LIMIT``.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    u = np.asarray(u0, dtype=float).copy()
    if u.ndim != 1:
        raise ShapeError("u0 must be a 1-d spatial profile")
    out = np.empty((steps + 1, u.size))
    out[0] = u
    for k in range(1, steps + 1):
        u = u + dt * model.rhs(u)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > BLOWUP_LIMIT:
            raise DivergenceError(f"forecast blew up at step {k}", when=k)
        out[k] = u
    return out
