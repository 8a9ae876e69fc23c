"""Two-sample permutation tests (KS and energy distance)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InputError
from ..rng import STREAM_MISC, generator


@dataclass
class TwoSampleReport:
    statistic_name: str
    n_x: int
    n_y: int
    statistic: float
    p_value: float
    n_perm: int
    alpha: float = 0.01

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def row(self) -> list:
        return [self.statistic_name, self.n_x, self.n_y, self.statistic, self.p_value,
                self.n_perm, self.alpha, int(self.reject)]


REPORT_HEADER = ["statistic", "n_x", "n_y", "value", "p_value", "n_perm", "alpha", "reject"]


def _labels(n_x: int, n: int, n_perm: int, seed: int) -> np.ndarray:
    """Boolean (n_perm, n) array, True marking the first sample under each permutation."""
    base = np.zeros(n, dtype=bool)
    base[:n_x] = True
    rng = generator(seed, STREAM_MISC)
    return rng.permuted(np.broadcast_to(base, (n_perm, n)), axis=1)


def _p_value(obs: float, perm: np.ndarray) -> float:
    slack = 1e-12 * max(1.0, abs(obs))
    return float((1 + np.count_nonzero(perm >= obs - slack)) / (1 + perm.size))


def _ks_stat(sorted_vals: np.ndarray, lab: np.ndarray, n_x: int, n_y: int) -> np.ndarray:
    """KS statistics for label rows ``lab`` (columns in the pooled sorted order)."""
    cx = np.cumsum(lab, axis=-1) / n_x
    cy = np.cumsum(~lab, axis=-1) / n_y
    # only compare at the end of each run of tied values
    last = np.append(sorted_vals[1:] != sorted_vals[:-1], True)
    return np.abs(cx - cy)[..., last].max(axis=-1)


def ks_two_sample(xs, ys, n_perm: int = 2000, seed: int = 0, alpha: float = 0.01) -> TwoSampleReport:
    """Two-sided KS statistic with a permutation p-value (count + 1) / (n_perm + 1)."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise InputError("both samples must be nonempty")
    if n_perm < 1:
        raise InputError("n_perm must be >= 1")
    pooled = np.concatenate((xs, ys))
    order = np.argsort(pooled, kind="stable")
    vals = pooled[order]
    n_x, n_y = xs.size, ys.size
    lab0 = np.zeros(pooled.size, dtype=bool)
    lab0[:n_x] = True
    obs = float(_ks_stat(vals, lab0[order], n_x, n_y))
    perm = []
    for chunk in range(0, n_perm, 256):
        lab = _labels(n_x, pooled.size, min(256, n_perm - chunk), seed + chunk)
        perm.append(_ks_stat(vals, lab[:, order], n_x, n_y))
    return TwoSampleReport("ks", n_x, n_y, obs, _p_value(obs, np.concatenate(perm)), n_perm, alpha)


def _energy_from_d(D: np.ndarray, lab: np.ndarray) -> np.ndarray:
    """V-statistic energy distances for label rows ``lab`` over the pooled distance matrix D."""
    Zx = lab.T.astype(float)
    Zy = 1.0 - Zx
    n_x = Zx.sum(axis=0)
    n_y = Zy.sum(axis=0)
    DZx = D @ Zx
    s_xx = np.sum(Zx * DZx, axis=0)
    s_xy = np.sum(Zy * DZx, axis=0)
    s_yy = D.sum() - 2.0 * s_xy - s_xx
    return 2.0 * s_xy / (n_x * n_y) - s_xx / n_x**2 - s_yy / n_y**2


def energy_test(X, Y, n_perm: int = 2000, seed: int = 0, alpha: float = 0.01) -> TwoSampleReport:
    """Energy-distance two-sample test on row vectors, permutation p-value."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0 or Y.shape[0] == 0:
        raise InputError("both samples must be nonempty")
    if X.shape[1] != Y.shape[1]:
        raise InputError("samples have different dimensions")
    if n_perm < 1:
        raise InputError("n_perm must be >= 1")
    P = np.vstack((X, Y))
    D = cdist(P, P)
    n_x = X.shape[0]
    lab0 = np.zeros((1, P.shape[0]), dtype=bool)
    lab0[0, :n_x] = True
    obs = float(_energy_from_d(D, lab0)[0])
    perm = []
    for chunk in range(0, n_perm, 256):
        lab = _labels(n_x, P.shape[0], min(256, n_perm - chunk), seed + chunk)
        perm.append(_energy_from_d(D, lab))
    return TwoSampleReport("energy", n_x, Y.shape[0], obs, _p_value(obs, np.concatenate(perm)),
                           n_perm, alpha)


def upper_triangles(mats) -> np.ndarray:
    mats = np.asarray(mats, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise InputError("expected a stack of square matrices")
    i, j = np.triu_indices(mats.shape[1], 1)
    return mats[:, i, j]


def distance_matrix_test(A, B, k: int, n_perm: int = 2000, seed: int = 0,
                         alpha: float = 0.01) -> TwoSampleReport:
    """Energy test on the vectorized upper triangles of two stacks of k x k matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    for M in (A, B):
        if M.ndim != 3 or M.shape[1:] != (k, k):
            raise InputError(f"matrices must be {k} x {k}")
    return energy_test(upper_triangles(A), upper_triangles(B), n_perm, seed, alpha)
