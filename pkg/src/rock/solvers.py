"""Regularized symmetric linear solves shared by the ODE and PDE learners.

The training problems all reduce to ``(G + lambda I) A = Y`` with G symmetric
positive semidefinite.  Because the matrix-valued kernel is separable, the
naive system of size ``n*p*d`` collapses to this ``n*p`` one with d
right-hand-side columns; :func:`solve_full_kronecker` materializes the big
system as a test-only oracle certifying that reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError, ShapeError
from .kernels import KernelSpec, gram

#: jittered retries after the plain attempt: base, then up to 3 doublings
_JITTER_DOUBLINGS = 3


@dataclass(frozen=True)
class RegularizedSystem:
    """A symmetric PSD system ``(gram + lambda I) A = targets``."""

    gram: np.ndarray
    targets: np.ndarray
    lam: float

    def __post_init__(self):
        G = np.asarray(self.gram, dtype=float)
        Y = np.asarray(self.targets, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ShapeError("gram must be square")
        if Y.shape[0] != G.shape[0]:
            raise ShapeError(
                f"targets have {Y.shape[0]} rows but gram is {G.shape[0]}x{G.shape[0]}"
            )
        scale = np.abs(G).max()
        if scale > 0 and np.abs(G - G.T).max() > 1e-10 * scale:
            raise ShapeError("gram matrix is not symmetric")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        object.__setattr__(self, "gram", G)
        object.__setattr__(self, "targets", Y)


def solve_regularized(system: RegularizedSystem) -> np.ndarray:
    """Solve ``(G + lambda I) A = Y`` by Cholesky with jitter escalation.

    The residual is checked against the unjittered matrix; one step of
    iterative refinement is applied before escalating.  If the factorization
    keeps failing (or the residual never meets tolerance) after the base
    jitter ``10 * eps * trace(H)/n`` has been doubled three times, a
    :class:`NumericalError` carrying the attempted jitters is raised.

    Returns
    -------
    ndarray of shape (n, d)
        Coefficients with ``||(G + lambda I) A - Y||_F <= 1e-8 (||Y||_F + 1)``.
    """
    G, Y, lam = system.gram, system.targets, system.lam
    n = G.shape[0]
    H = G + lam * np.eye(n)
    tol = 1e-8 * (np.linalg.norm(Y) + 1.0)
    base = 10.0 * np.finfo(float).eps * abs(np.trace(H)) / n
    if base == 0.0:
        base = 10.0 * np.finfo(float).eps
    jitters = [0.0] + [base * 2.0**k for k in range(_JITTER_DOUBLINGS + 1)]

    tried = []
    for jitter in jitters:
        tried.append(jitter)
        try:
            factor = scipy.linalg.cho_factor(
                H + jitter * np.eye(n) if jitter else H, lower=True
            )
        except scipy.linalg.LinAlgError:
            continue
        A = scipy.linalg.cho_solve(factor, Y)
        # residual against the *unjittered* system, with one refinement pass
        for _ in range(2):
            R = Y - H @ A
            if np.linalg.norm(R) <= tol:
                return A
            A = A + scipy.linalg.cho_solve(factor, R)
        if np.linalg.norm(Y - H @ A) <= tol:
            return A
    raise NumericalError(
        f"regularized solve failed for n={n}, lambda={lam:g} "
        f"after jitters {tried}",
        jitters=tried,
    )


def solve_full_kronecker(G, lam: float, y_flat, d: int) -> np.ndarray:
    """Materialize ``(G (x) I_d + lambda I)`` and solve it directly.

    Test-only oracle for the reduced solve; refuses systems larger than
    500 unknowns.  ``y_flat`` must be the row-major flattening of the
    (n, d) target matrix, i.e. the column stacking of its transpose.
    """
    G = np.asarray(G, dtype=float)
    y_flat = np.asarray(y_flat, dtype=float).ravel()
    npd = y_flat.size
    if npd > 500:
        raise ConfigError(
            f"full Kronecker solve is a small-instance oracle (got {npd} > 500)"
        )
    if G.shape[0] * d != npd:
        raise ShapeError("y_flat length must equal G.shape[0] * d")
    M = np.kron(G, np.eye(d)) + lam * np.eye(npd)
    return np.linalg.solve(M, y_flat)


@dataclass(frozen=True)
class RidgeFit:
    """Kernel ridge regression fit ``f(x) = sum_i k(x, x_i) alpha_i``."""

    kernel: KernelSpec
    points: np.ndarray  # (d, n)
    coef: np.ndarray  # (n, d_out)

    def predict(self, Xq) -> np.ndarray:
        """Evaluate the fit at query columns; returns (d_out, M)."""
        return (gram(self.kernel, Xq, self.points) @ self.coef).T


def ridge_regression_oracle(
    kernel: KernelSpec, X, Y, lam: float
) -> RidgeFit:
    """Fit multivariate kernel ridge regression.

    With the separable kernel ``k * I_d`` the coefficient system is the
    scalar Gram matrix with one right-hand-side column per output dimension:
    ``(K + lambda I) alpha = Y'``.

    Parameters
    ----------
    X : (d, n) training inputs, columnwise.
    Y : (d_out, n) training targets, columnwise.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[1] != Y.shape[1]:
        raise ShapeError("X and Y must have one column per sample")
    K = gram(kernel, X, X)
    K = (K + K.T) / 2.0
    coef = solve_regularized(RegularizedSystem(K, Y.T, lam))
    return RidgeFit(kernel=kernel, points=X, coef=coef)


def regularized_objective(G, Y, lam: float, A) -> float:
    """Value of ``||G A - Y||_F^2 + lambda * trace(A' G A)``.

    This is the finite-dimensional training objective; the solution of
    ``(G + lambda I) A = Y`` is its unique minimizer for PSD G.
    """
    G = np.asarray(G, dtype=float)
    Y = np.asarray(Y, dtype=float)
    A = np.asarray(A, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if A.ndim == 1:
        A = A[:, None]
    GA = G @ A
    R = GA - Y
    return float(np.sum(R * R) + lam * np.sum(A * GA))
