"""Scalar radial kernels and Gram-matrix evaluation.

The hypothesis space uses the separable matrix-valued kernel
``k(x, y) * I_d``, so everything downstream only ever needs the scalar Gram
matrix of the radial profile ``k``.  Three closed-form profiles are provided
(Gaussian, Laplace, and a C^10 Matern) plus a random-Fourier-feature
approximation of the Gaussian profile with an optional periodic variant.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
MATERN10 = "matern10"
RANDOM_FOURIER = "random_fourier"

FAMILIES = (GAUSSIAN, LAPLACE, MATERN10, RANDOM_FOURIER)

# exp(-u) underflows near u ~ 745; beyond this the profile is numerically 0
_MATERN_CUTOFF = 700.0


@dataclass(frozen=True)
class RffConfig:
    """Random-Fourier-feature settings.

    ``num_features`` must be even: features come in cos/sin pairs, which
    removes the random-phase variance of the single-cosine construction.
    When ``period`` is set, frequencies are snapped to the integer lattice
    scaled by ``2*pi/period`` so every feature is period-periodic in each
    coordinate.
    """

    num_features: int
    period: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_features < 1:
            raise ConfigError("num_features must be >= 1")
        if self.num_features % 2 != 0:
            raise ConfigError(
                "num_features must be even (features are cos/sin pairs)"
            )
        if self.period is not None and self.period <= 0:
            raise ConfigError("period must be positive")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus scale parameter.

    ``scale`` is sigma for the Gaussian family and gamma for Laplace/Matern.
    The random-Fourier family approximates the Gaussian profile with the
    same ``scale``; its frequencies are drawn from N(0, 1/scale^2), the
    spectral measure of that profile.  The frequency draw is deterministic
    given ``rff.seed`` and is cached per input dimension, so evaluation is
    pure and safe to share across threads.
    """

    family: str
    scale: float
    rff: RffConfig | None = None
    _weight_cache: dict = field(
        default_factory=dict, init=False, repr=False, compare=False
    )
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if not self.scale > 0:
            raise ConfigError("kernel scale must be positive")
        if (self.rff is not None) != (self.family == RANDOM_FOURIER):
            raise ConfigError(
                "rff settings are required for the random_fourier family "
                "and not allowed otherwise"
            )


def _profile(spec: KernelSpec, r: np.ndarray, overwrite: bool = False) -> np.ndarray:
    """Evaluate the scalar radial profile k(r) elementwise.

    With ``overwrite`` the input buffer may be destroyed; evaluation is
    memory-bound on large Gram matrices, so the hot paths reuse it.
    """
    if spec.family == GAUSSIAN:
        z = np.multiply(r, r, out=r if overwrite else None)
        z *= -1.0 / (2.0 * spec.scale**2)
        return np.exp(z, out=z)
    if spec.family == LAPLACE:
        z = np.multiply(r, -1.0 / spec.scale, out=r if overwrite else None)
        return np.exp(z, out=z)
    # C^10 Matern: exp(-u)/945 * (u^5 + 15u^4 + 105u^3 + 420u^2 + 945u + 945)
    # with u = r/gamma, evaluated by Horner's scheme.  Clamp u so the
    # (finite) polynomial never meets an overflowing exponential argument.
    u = np.multiply(r, 1.0 / spec.scale, out=r if overwrite else None)
    clamped = bool(u.size) and float(u.max()) > _MATERN_CUTOFF
    if clamped:
        mask = u > _MATERN_CUTOFF
        u = np.minimum(u, _MATERN_CUTOFF, out=u)
    poly = u + 15.0
    poly *= u
    poly += 105.0
    poly *= u
    poly += 420.0
    poly *= u
    poly += 945.0
    poly *= u
    poly += 945.0
    poly *= 1.0 / 945.0
    np.negative(u, out=u)
    vals = np.exp(u, out=u)
    vals *= poly
    if clamped:
        vals[mask] = 0.0
    return vals


def eval_scalar_kernel(spec: KernelSpec, r: float) -> float:
    """Evaluate k(r) for a single nonnegative radius.

    Parameters
    ----------
    spec : KernelSpec
        Gaussian, Laplace, or Matern spec.  The random-Fourier family has no
        closed-form radial profile; use :func:`rff_gram` instead.
    r : float
        Nonnegative distance.

    Returns
    -------
    float
        k(r), which lies in (0, 1] and equals 1 exactly at r = 0.
    """
    if spec.family == RANDOM_FOURIER:
        raise ConfigError(
            "random_fourier has no pointwise radial profile; use rff_gram"
        )
    r = float(r)
    if r < 0:
        raise DataError("kernel radius must be nonnegative")
    return float(_profile(spec, np.array([r]))[0])


def _as_points(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be a d x M matrix of column points")
    return X


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared distances via the ||x||^2 + ||y||^2 - 2 x'y expansion.

    Small negative values from cancellation are clamped to 0 before any
    square root, so duplicated points never produce NaN.
    """
    x2 = np.sum(X * X, axis=0)
    y2 = np.sum(Y * Y, axis=0)
    d2 = x2[:, None] + y2[None, :] - 2.0 * (X.T @ Y)
    np.maximum(d2, 0.0, out=d2)
    return d2


def gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """Gram matrix with entries k(||X_i - Y_j||).

    Parameters
    ----------
    spec : KernelSpec
    X, Y : arrays of shape (d, M) and (d, N)
        Points stored columnwise.

    Returns
    -------
    ndarray of shape (M, N)
    """
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(
            f"point dimensions differ: X has {X.shape[0]} rows, "
            f"Y has {Y.shape[0]}"
        )
    if spec.family == RANDOM_FOURIER:
        return rff_gram(spec, X, Y)
    d2 = _sqdist(X, Y)
    return _profile(spec, np.sqrt(d2, out=d2), overwrite=True)


def _rff_weights(spec: KernelSpec, dim: int) -> np.ndarray:
    """Frequency matrix (dim x num_features/2), drawn once per dimension."""
    with spec._lock:
        w = spec._weight_cache.get(dim)
        if w is None:
            rng = np.random.default_rng(spec.rff.seed)
            half = spec.rff.num_features // 2
            w = rng.normal(size=(dim, half)) / spec.scale
            if spec.rff.period is not None:
                step = 2.0 * np.pi / spec.rff.period
                w = np.round(w / step) * step
            spec._weight_cache[dim] = w
    return w


def rff_features(spec: KernelSpec, X) -> np.ndarray:
    """Random Fourier feature map, shape (num_features, M).

    Features are sqrt(2/q) * [cos(w'x); sin(w'x)] over q/2 frequencies, so
    that features(X)' features(Y) is a Monte-Carlo estimate of the Gaussian
    Gram matrix.  With ``period`` set the map is exactly periodic:
    features(x + period * e_j) == features(x).
    """
    if spec.family != RANDOM_FOURIER:
        raise ConfigError("rff_features requires the random_fourier family")
    X = _as_points(X, "X")
    w = _rff_weights(spec, X.shape[0])
    z = w.T @ X
    scale = np.sqrt(2.0 / spec.rff.num_features)
    return scale * np.vstack([np.cos(z), np.sin(z)])


def rff_gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """Gram matrix of the random Fourier features (M x N, symmetric PSD for X=Y)."""
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError("point dimensions differ between X and Y")
    return rff_features(spec, X).T @ rff_features(spec, Y)
