"""Normalized shifted-Legendre test features and quadrature block assembly.

Each trajectory gets its own copy of the first ``p`` Legendre polynomials,
shifted to the trajectory's time interval and normalized to unit L2 norm
there.  The block-diagonal matrices ``qphi`` (quadrature-weighted features)
and ``qphid`` (negated weighted feature derivatives with boundary terms
folded into the first and last sample columns) turn all the integrals of the
training objective into plain matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ShapeError


def legendre_features_with_derivatives(ts, n: int, a: float, b: float):
    """Shifted, L2-normalized Legendre features and their time derivatives.

    Parameters
    ----------
    ts : array of shape (m,)
        Evaluation times, all inside [a, b].
    n : int
        Maximum degree (n >= 0); n + 1 features are returned.
    a, b : float
        Interval endpoints with b > a.

    Returns
    -------
    (Ts, Tsp) : ndarrays of shape (m, n + 1)
        Column j holds the degree-j polynomial, normalized so its L2 norm on
        [a, b] is 1, and its derivative with respect to t.

    Notes
    -----
    The polynomials are built with the three-term recurrence
    ``(k) T_k = (2k - 1) x T_{k-1} - (k - 1) T_{k-2}`` on the mapped variable
    ``x = (2 t - (a + b)) / (b - a)``, and the derivative recurrence obtained
    by differentiating it.  The normalization factor is
    ``sqrt((2j + 1) / 2) * sqrt(2 / (b - a)) = sqrt((2j + 1) / (b - a))``;
    derivatives carry the extra chain-rule factor ``2 / (b - a)``.
    """
    if b <= a:
        raise ConfigError(f"invalid interval: need b > a, got [{a}, {b}]")
    if n < 0:
        raise ConfigError("max degree must be >= 0")
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1:
        raise ShapeError("ts must be one-dimensional")
    slack = 1e-9 * (b - a)
    if ts.size and (ts.min() < a - slack or ts.max() > b + slack):
        raise DataError("evaluation times fall outside [a, b]")

    x = (2.0 * ts - (a + b)) / (b - a)
    m = ts.size
    T = np.ones((m, n + 1))
    Tp = np.zeros((m, n + 1))
    if n >= 1:
        T[:, 1] = x
        Tp[:, 1] = 1.0
    for k in range(2, n + 1):
        T[:, k] = ((2 * k - 1) * x * T[:, k - 1] - (k - 1) * T[:, k - 2]) / k
        Tp[:, k] = (
            (2 * k - 1) * (T[:, k - 1] + x * Tp[:, k - 1])
            - (k - 1) * Tp[:, k - 2]
        ) / k
    norm = np.sqrt((2.0 * np.arange(n + 1) + 1.0) / (b - a))
    return T * norm, Tp * norm * (2.0 / (b - a))


def legendre_features(ts, n: int, a: float, b: float) -> np.ndarray:
    """Feature matrix only; see :func:`legendre_features_with_derivatives`."""
    return legendre_features_with_derivatives(ts, n, a, b)[0]


def trapezoid_weights(ts) -> np.ndarray:
    """Composite trapezoid weights for (possibly nonuniform) sample times.

    ``w[0] = (t1 - t0)/2``, interior ``w[j] = (t_{j+1} - t_{j-1})/2``,
    ``w[-1] = (t_m - t_{m-1})/2``; the weights sum to ``t_m - t_0``.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1:
        raise ShapeError("ts must be one-dimensional")
    if ts.size < 2:
        raise DataError("trajectory too short: need at least 2 samples")
    dt = np.diff(ts)
    if np.any(dt <= 0):
        raise DataError("sample times must be strictly increasing")
    w = np.zeros(ts.size)
    w[:-1] += dt / 2.0
    w[1:] += dt / 2.0
    return w


@dataclass(frozen=True)
class TestBlock:
    """Block-diagonal feature matrices for a list of trajectories.

    Attributes
    ----------
    qphi : ndarray (n_blocks * p, total_samples)
        Block i holds the quadrature-weighted features of trajectory i;
        entries outside the diagonal blocks are exactly zero.
    qphid : ndarray, same shape
        Negated weighted feature derivatives, with the feature values at the
        interval endpoints subtracted from the first sample column and added
        to the last, realizing the integration-by-parts form of the targets.
    p : int
        Features per trajectory.
    block_offsets : tuple of (start, stop)
        Sample-column range of each trajectory block.
    """

    qphi: np.ndarray
    qphid: np.ndarray
    p: int
    block_offsets: tuple

    @property
    def n_blocks(self) -> int:
        return len(self.block_offsets)

    @property
    def total_samples(self) -> int:
        return self.qphi.shape[1]

    def row_slice(self, i: int) -> slice:
        return slice(i * self.p, (i + 1) * self.p)


def build_test_block(ts_list, p_minus_1: int, weights_list=None) -> TestBlock:
    """Assemble the block-diagonal qphi / qphid matrices.

    Parameters
    ----------
    ts_list : sequence of time vectors
        One strictly increasing vector per trajectory, each with >= 2
        samples.  Features for trajectory i live on its own interval
        ``[ts_i[0], ts_i[-1]]``.
    p_minus_1 : int
        Maximum Legendre degree; ``p = p_minus_1 + 1`` features per block.
    weights_list : sequence of weight vectors, optional
        Quadrature weights per trajectory; composite trapezoid weights are
        used when omitted.
    """
    if p_minus_1 < 0:
        raise ConfigError("feature count must be >= 1")
    if len(ts_list) == 0:
        raise DataError("no trajectories given")
    if weights_list is None:
        weights_list = [trapezoid_weights(ts) for ts in ts_list]
    if len(weights_list) != len(ts_list):
        raise ShapeError("weights_list length must match ts_list")

    p = p_minus_1 + 1
    qphi_blocks = []
    qphid_blocks = []
    offsets = []
    start = 0
    for ts, w in zip(ts_list, weights_list):
        ts = np.asarray(ts, dtype=float)
        w = np.asarray(w, dtype=float)
        if ts.size < 2:
            raise DataError("trajectory too short: need at least 2 samples")
        if w.shape != ts.shape:
            raise ShapeError("weights shape must match sample times")
        T, Tp = legendre_features_with_derivatives(ts, p_minus_1, ts[0], ts[-1])
        qphi_blocks.append((T * w[:, None]).T)
        g = -(Tp * w[:, None])
        g[0, :] -= T[0, :]
        g[-1, :] += T[-1, :]
        qphid_blocks.append(g.T)
        offsets.append((start, start + ts.size))
        start += ts.size

    n = len(qphi_blocks)
    qphi = np.zeros((n * p, start))
    qphid = np.zeros((n * p, start))
    for i, (lo, hi) in enumerate(offsets):
        qphi[i * p : (i + 1) * p, lo:hi] = qphi_blocks[i]
        qphid[i * p : (i + 1) * p, lo:hi] = qphid_blocks[i]
    return TestBlock(qphi=qphi, qphid=qphid, p=p, block_offsets=tuple(offsets))
