"""Fixed-step explicit integrators for data generation and forecasting.

All steppers are batched: the state may be a single column ``(d,)`` or a
matrix ``(d, B)`` of B states advanced in lockstep, and ``dt`` may be a
scalar or a per-column vector of length B.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError

EULER = "euler"
RK4 = "rk4"
METHODS = (EULER, RK4)


def _dt_factor(dt, x):
    dt = np.asarray(dt, dtype=float)
    if dt.ndim == 0:
        return float(dt)
    if x.ndim == 2 and dt.shape == (x.shape[1],):
        return dt[None, :]
    raise ShapeError("dt must be a scalar or match the batch width")


def euler_step(f, x, dt):
    return x + _dt_factor(dt, x) * f(x)


def rk4_step(f, x, dt):
    h = _dt_factor(dt, x)
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(f, x, dt, method=RK4):
    if method == RK4:
        return rk4_step(f, x, dt)
    if method == EULER:
        return euler_step(f, x, dt)
    raise ConfigError(f"unknown integrator {method!r}")


def rollout(f, x0, t_grid, method=RK4, max_norm=None):
    """Integrate ``dx/dt = f(x)`` through the given time grid.

    Parameters
    ----------
    f : callable
        Vector field; must accept states of the same shape as ``x0``.
    x0 : (d,) or (d, B) array
        Initial state(s) at ``t_grid[0]``.
    t_grid : strictly increasing time vector of length m.
    method : "rk4" or "euler".
    max_norm : float, optional
        Additional blow-up threshold on ``max |x|``.

    Returns
    -------
    (d, m) array for a single state, (d, B, m) for a batch.

    Raises
    ------
    DivergenceError
        If the state becomes non-finite (or exceeds ``max_norm``); the error
        reports the time at which the blow-up was detected.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise ShapeError("t_grid must be a nonempty 1-d vector")
    if np.any(np.diff(t_grid) <= 0):
        raise ConfigError("t_grid must be strictly increasing")
    x = np.asarray(x0, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    out = np.empty(x.shape + (t_grid.size,))
    out[..., 0] = x
    for j in range(1, t_grid.size):
        x = step(f, x, t_grid[j] - t_grid[j - 1], method)
        if not np.all(np.isfinite(x)) or (
            max_norm is not None and np.abs(x).max() > max_norm
        ):
            raise DivergenceError(
                f"state blew up at t={t_grid[j]:g}", when=float(t_grid[j])
            )
        out[..., j] = x
    return out[:, 0, :] if single else out
