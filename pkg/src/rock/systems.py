"""Reference dynamical systems and reproducible dataset generation.

The ODE systems are the literature-standard forms with their usual default
parameters; all constants are overridable through ``SystemSpec.params`` and
recorded in dataset manifests.  PDE systems are integrated by the method of
lines with RK4 on a refined mesh, then subsampled to the requested grid.
Observation noise, when requested, is added to the samples after
integration with per-trajectory seeds spawned from the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import integrate
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .ode import Trajectory, TrajectorySet
from .pde import FieldGrid

LORENZ63 = "lorenz63"
LORENZ96 = "lorenz96"
FITZHUGH_NAGUMO = "fitzhugh_nagumo"
ROSSLER = "rossler"
DOUBLE_PENDULUM = "double_pendulum"
HEAT1D = "heat1d"
KURAMOTO_SIVASHINSKY = "kuramoto_sivashinsky"

ODE_SYSTEMS = (LORENZ63, LORENZ96, FITZHUGH_NAGUMO, ROSSLER, DOUBLE_PENDULUM)
PDE_SYSTEMS = (HEAT1D, KURAMOTO_SIVASHINSKY)
SYSTEMS = ODE_SYSTEMS + PDE_SYSTEMS

_DEFAULT_PARAMS = {
    LORENZ63: {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
    LORENZ96: {"forcing": 8.0},
    FITZHUGH_NAGUMO: {"a": 0.7, "b": 0.8, "tau": 12.5, "current": 0.5},
    ROSSLER: {"a": 0.2, "b": 0.2, "c": 5.7},
    DOUBLE_PENDULUM: {"m1": 1.0, "m2": 1.0, "l1": 1.0, "l2": 1.0, "g": 9.81},
    HEAT1D: {"diffusivity": 0.1, "length": 2.0 * np.pi},
    KURAMOTO_SIVASHINSKY: {"length": 22.0},
}

_DEFAULT_DIM = {
    LORENZ63: 3,
    LORENZ96: 8,
    FITZHUGH_NAGUMO: 2,
    ROSSLER: 3,
    DOUBLE_PENDULUM: 4,
    HEAT1D: 256,
    KURAMOTO_SIVASHINSKY: 128,
}


@dataclass(frozen=True)
class SystemSpec:
    """A named system with parameters, dimension, noise level, and seed."""

    name: str
    params: dict = dc_field(default_factory=dict)
    dim: int | None = None
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.name not in SYSTEMS:
            raise ConfigError(f"unknown system {self.name!r}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        merged = dict(_DEFAULT_PARAMS[self.name])
        merged.update(self.params or {})
        dim = self.dim if self.dim is not None else _DEFAULT_DIM[self.name]
        if self.name == LORENZ96 and dim < 4:
            raise ConfigError("lorenz96 requires dim >= 4")
        if self.name in (LORENZ63, ROSSLER) and dim != 3:
            raise ConfigError(f"{self.name} is three-dimensional")
        if self.name == FITZHUGH_NAGUMO and dim != 2:
            raise ConfigError("fitzhugh_nagumo is two-dimensional")
        if self.name == DOUBLE_PENDULUM and dim != 4:
            raise ConfigError("double_pendulum has a four-dimensional state")
        if self.name in PDE_SYSTEMS and dim < 8:
            raise ConfigError("PDE systems need at least 8 spatial points")
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "dim", dim)

    @property
    def is_pde(self) -> bool:
        return self.name in PDE_SYSTEMS


def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    if x.shape[0] != dim:
        raise ShapeError(f"state has dimension {x.shape[0]}, expected {dim}")
    return x, single


def vector_field(spec: SystemSpec, x) -> np.ndarray:
    """Right-hand side of the system at state columns x (d,) or (d, B)."""
    x, single = _as_batch(x, spec.dim)
    p = spec.params
    if spec.name == LORENZ63:
        s, r, b = p["sigma"], p["rho"], p["beta"]
        out = np.stack(
            [
                s * (x[1] - x[0]),
                x[0] * (r - x[2]) - x[1],
                x[0] * x[1] - b * x[2],
            ]
        )
    elif spec.name == LORENZ96:
        f = p["forcing"]
        out = (np.roll(x, -1, 0) - np.roll(x, 2, 0)) * np.roll(x, 1, 0) - x + f
    elif spec.name == FITZHUGH_NAGUMO:
        v, w = x[0], x[1]
        out = np.stack(
            [
                v - v**3 / 3.0 - w + p["current"],
                (v + p["a"] - p["b"] * w) / p["tau"],
            ]
        )
    elif spec.name == ROSSLER:
        out = np.stack(
            [
                -x[1] - x[2],
                x[0] + p["a"] * x[1],
                p["b"] + x[2] * (x[0] - p["c"]),
            ]
        )
    elif spec.name == DOUBLE_PENDULUM:
        out = _double_pendulum_field(x, p)
    elif spec.name == HEAT1D:
        h = p["length"] / spec.dim
        out = p["diffusivity"] * _lap(x.T, h).T
    elif spec.name == KURAMOTO_SIVASHINSKY:
        h = p["length"] / spec.dim
        u = x.T
        out = (-u * _dx(u, h) - _lap(u, h) - _lap(_lap(u, h), h)).T
    else:  # pragma: no cover
        raise ConfigError(spec.name)
    return out[:, 0] if single else out


def _dx(u, h):
    return (np.roll(u, -1, -1) - np.roll(u, 1, -1)) / (2.0 * h)


def _lap(u, h):
    return (np.roll(u, -1, -1) - 2.0 * u + np.roll(u, 1, -1)) / (h * h)


def _double_pendulum_field(x, p):
    # canonical equations for angles (th1, th2) and conjugate momenta (p1, p2)
    m1, m2, l1, l2, g = p["m1"], p["m2"], p["l1"], p["l2"], p["g"]
    th1, th2, p1, p2 = x
    c = np.cos(th1 - th2)
    s = np.sin(th1 - th2)
    den = m1 + m2 * s * s
    th1_dot = (l2 * p1 - l1 * p2 * c) / (l1 * l1 * l2 * den)
    th2_dot = (l1 * (m1 + m2) * p2 - l2 * m2 * p1 * c) / (m2 * l1 * l2 * l2 * den)
    c1 = p1 * p2 * s / (l1 * l2 * den)
    c2 = (
        (l2 * l2 * m2 * p1 * p1 + l1 * l1 * (m1 + m2) * p2 * p2
         - l1 * l2 * m2 * p1 * p2 * c)
        * np.sin(2.0 * (th1 - th2))
        / (2.0 * l1 * l1 * l2 * l2 * den * den)
    )
    p1_dot = -(m1 + m2) * g * l1 * np.sin(th1) - c1 + c2
    p2_dot = -m2 * g * l2 * np.sin(th2) + c1 - c2
    return np.stack([th1_dot, th2_dot, p1_dot, p2_dot])


def double_pendulum_energy(spec: SystemSpec, x) -> np.ndarray:
    """Total energy of double-pendulum states; conserved along exact flow."""
    x, single = _as_batch(x, 4)
    p = spec.params
    m1, m2, l1, l2, g = p["m1"], p["m2"], p["l1"], p["l2"], p["g"]
    th1, th2, p1, p2 = x
    c = np.cos(th1 - th2)
    den = 2.0 * l1 * l1 * l2 * l2 * m2 * (m1 + m2 * np.sin(th1 - th2) ** 2)
    kinetic = (
        l2 * l2 * m2 * p1 * p1
        + l1 * l1 * (m1 + m2) * p2 * p2
        - 2.0 * m2 * l1 * l2 * p1 * p2 * c
    ) / den
    potential = -(m1 + m2) * g * l1 * np.cos(th1) - m2 * g * l2 * np.cos(th2)
    out = kinetic + potential
    return out[0] if single else out


def _initial_conditions(spec: SystemSpec, n: int, rng) -> np.ndarray:
    if spec.name == LORENZ63:
        low, high = [-15.0, -20.0, 5.0], [15.0, 20.0, 40.0]
        return rng.uniform(low, high, size=(n, 3)).T
    if spec.name == LORENZ96:
        return spec.params["forcing"] + rng.normal(size=(spec.dim, n))
    if spec.name == FITZHUGH_NAGUMO:
        return rng.uniform([-2.0, -0.5], [2.0, 1.5], size=(n, 2)).T
    if spec.name == ROSSLER:
        return rng.uniform([-8.0, -8.0, 0.0], [8.0, 8.0, 8.0], size=(n, 3)).T
    if spec.name == DOUBLE_PENDULUM:
        th = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=(2, n))
        return np.vstack([th, np.zeros((2, n))])
    raise ConfigError(spec.name)  # pragma: no cover


def _initial_profile(spec: SystemSpec, xs: np.ndarray, rng) -> np.ndarray:
    """Initial field from sine modes: params['init_modes'] = [[k, amp, phase]]."""
    modes = spec.params.get("init_modes")
    if modes is None:
        if spec.name == HEAT1D:
            modes = [[1, 1.0, 0.0]]
        else:
            # random smooth profile with a decaying spectrum
            modes = [
                [k, rng.normal() / k, rng.uniform(0.0, 2.0 * np.pi)]
                for k in range(1, 5)
            ]
    u0 = np.zeros_like(xs)
    base = 2.0 * np.pi / spec.params["length"]
    for k, amp, phase in modes:
        u0 += amp * np.sin(base * k * xs + phase)
    return u0


def _stable_dt(spec: SystemSpec, h: float) -> float:
    if spec.name == HEAT1D:
        return 0.25 * h * h / spec.params["diffusivity"]
    # fourth-order term dominates the stability bound
    return 0.1 * h**4


def generate(
    spec: SystemSpec,
    n_traj: int,
    samples_per_traj: int,
    dt: float,
    transient: float = 0.0,
    seed: int | None = None,
    substeps: int = 1,
):
    """Generate a reproducible dataset from a reference system.

    Returns a :class:`TrajectorySet` for ODE systems or a
    :class:`FieldGrid` for PDE systems (which require ``n_traj == 1``).
    Gaussian observation noise of ``spec.noise_std`` is added to the samples
    after integration; two calls with the same seed are identical.
    """
    if n_traj < 1 or samples_per_traj < 2:
        raise ConfigError("need n_traj >= 1 and samples_per_traj >= 2")
    if dt <= 0 or transient < 0 or substeps < 1:
        raise ConfigError("dt must be > 0, transient >= 0, substeps >= 1")
    master = spec.seed if seed is None else seed
    rng = np.random.default_rng(master)
    if spec.is_pde:
        if n_traj != 1:
            raise ConfigError("PDE systems generate a single field grid")
        return _generate_field(spec, samples_per_traj, dt, transient, rng, master)

    x = _initial_conditions(spec, n_traj, rng)
    f = lambda z: vector_field(spec, z)
    h = dt / substeps
    if transient > 0:
        n_burn = int(np.ceil(transient / h))
        for _ in range(n_burn):
            x = integrate.rk4_step(f, x, h)
        _check_finite(x, "transient")
    m = samples_per_traj
    states = np.empty((spec.dim, n_traj, m))
    states[:, :, 0] = x
    for j in range(1, m):
        for _ in range(substeps):
            x = integrate.rk4_step(f, x, h)
        _check_finite(x, f"sample {j}")
        states[:, :, j] = x
    ts = dt * np.arange(m)

    noise_seeds = np.random.SeedSequence(master).spawn(n_traj)
    trajs = []
    for i in range(n_traj):
        xs = states[:, i, :]
        if spec.noise_std > 0:
            noise_rng = np.random.default_rng(noise_seeds[i])
            xs = xs + spec.noise_std * noise_rng.normal(size=xs.shape)
        trajs.append(Trajectory(ts=ts.copy(), xs=xs))
    return TrajectorySet(tuple(trajs))


def _check_finite(x, where):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"generator blew up during {where}")


def _generate_field(spec, m, dt, transient, rng, master):
    n_out = spec.dim
    # the quartic term makes mesh refinement prohibitively stiff for KS
    default_fine = 4 if spec.name == HEAT1D else 1
    fine_factor = int(spec.params.get("fine_factor", default_fine))
    n_fine = n_out * fine_factor
    length = spec.params["length"]
    h = length / n_fine
    xs_fine = h * np.arange(n_fine)
    u = _initial_profile(spec, xs_fine, rng)

    fine_spec = SystemSpec(
        name=spec.name, params=dict(spec.params), dim=n_fine, seed=spec.seed
    )
    f = lambda z: vector_field(fine_spec, z)
    h_t = _stable_dt(spec, h)
    n_sub = max(1, int(np.ceil(dt / h_t)))
    h_t = dt / n_sub

    if transient > 0:
        for _ in range(int(np.ceil(transient / h_t))):
            u = integrate.rk4_step(f, u, h_t)
        _check_finite(u, "transient")
    out = np.empty((m, n_out))
    out[0] = u[::fine_factor]
    for j in range(1, m):
        for _ in range(n_sub):
            u = integrate.rk4_step(f, u, h_t)
        _check_finite(u, f"sample {j}")
        out[j] = u[::fine_factor]
    if spec.noise_std > 0:
        noise_rng = np.random.default_rng(np.random.SeedSequence(master).spawn(1)[0])
        out = out + spec.noise_std * noise_rng.normal(size=out.shape)
    return FieldGrid(
        u=out,
        ts=dt * np.arange(m),
        xs=xs_fine[::fine_factor].copy(),
        periodic=True,
    )


def add_observation_noise(data: TrajectorySet, std, seed: int = 0) -> TrajectorySet:
    """Add Gaussian observation noise to every sample.

    ``std`` may be a scalar or a per-dimension vector of length d.
    """
    std = np.asarray(std, dtype=float)
    if std.ndim == 1 and std.size != data.d:
        raise ShapeError("per-dimension noise std must have length d")
    if np.any(std < 0):
        raise DataError("noise std must be nonnegative")
    seeds = np.random.SeedSequence(seed).spawn(len(data))
    out = []
    for traj, s in zip(data, seeds):
        rng = np.random.default_rng(s)
        noise = rng.normal(size=traj.xs.shape)
        scale = std[:, None] if std.ndim == 1 else std
        out.append(Trajectory(ts=traj.ts, xs=traj.xs + scale * noise))
    return TrajectorySet(tuple(out))
