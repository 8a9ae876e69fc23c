"""Reference samplers for the critical-window limit.

* Brownian motion with parabolic drift ``W_t + lambda t - t^2/2`` on a grid,
  reflected at its running minimum; the sorted excursion lengths sample the
  limit law of rescaled component sizes.
* Erdos-Renyi graphs ``G(n, (1 + lambda n^{-1/3})/n)`` by geometric skipping
  over the pair list; they give a finite-n reference for the same law and a
  second estimator of kappa(lambda).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InputError
from .rng import STREAM_MISC, generator


def default_horizon(lam: float) -> float:
    return 4.0 * max(abs(lam), 1.0) + 16.0


@dataclass
class DriftPath:
    lam: float
    T: float
    h: float
    values: np.ndarray
    noise: bool = True


@dataclass
class ExcursionLengths:
    lengths: np.ndarray  # sorted descending
    T: float
    h: float
    discarded: int = 0

    @property
    def sum_sq(self) -> float:
        return float(np.sum(self.lengths**2))

    def top(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        out[:min(k, self.lengths.size)] = self.lengths[:k]
        return out


def _check_grid(T: float, h: float) -> None:
    if T <= 0 or h <= 0:
        raise InputError("T and h must be positive")
    if h > T / 100:
        raise InputError("h must be at most T/100")


def drift_path(lam: float, T: float, h: float, seed: int = 0, noise: bool = True) -> DriftPath:
    """W^lambda on the grid kh, k = 0..floor(T/h)."""
    _check_grid(T, h)
    n = int(round(T / h))
    t = np.arange(n + 1) * h
    w = lam * t - 0.5 * t * t
    if noise:
        inc = generator(seed, STREAM_MISC).standard_normal(n) * math.sqrt(h)
        w[1:] += np.cumsum(inc)
    return DriftPath(lam, T, h, w, noise)


def excursion_counts(values: np.ndarray) -> np.ndarray:
    """Grid-point counts of the maximal stretches where W - running min > 0."""
    reflected = values - np.minimum.accumulate(values)
    pos = reflected > 0
    if not pos.any():
        return np.zeros(0, dtype=np.int64)
    edges = np.diff(np.concatenate(([False], pos, [False])).astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return ends - starts


def lengths_from_path(path: DriftPath, min_steps: int = 2) -> ExcursionLengths:
    counts = excursion_counts(path.values)
    keep = counts >= min_steps
    lengths = np.sort(counts[keep] * path.h)[::-1]
    return ExcursionLengths(lengths, path.T, path.h, int(np.count_nonzero(~keep)))


def sample_excursions(lam: float, T: float | None = None, h: float = 1e-4, seed: int = 0,
                      noise: bool = True, min_steps: int = 2) -> ExcursionLengths:
    """Sorted excursion lengths of the reflected drifted path.

    A length is (number of grid points strictly above the running minimum)
    times h; stretches of fewer than ``min_steps`` points are dropped and
    counted in ``discarded``.
    """
    T = default_horizon(lam) if T is None else T
    return lengths_from_path(drift_path(lam, T, h, seed, noise), min_steps)


def kappa_brownian(lam: float, n_samples: int, T: float | None = None, h: float = 1e-4,
                   base_seed: int = 0, noise: bool = True) -> tuple[float, float, int]:
    """(mean of sum |gamma_i|^2, standard error, total discarded micro-excursions)."""
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    vals = np.empty(n_samples)
    dropped = 0
    for k in range(n_samples):
        ex = sample_excursions(lam, T, h, base_seed + k, noise)
        vals[k] = ex.sum_sq
        dropped += ex.discarded
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return float(vals.mean()), se, dropped


# ----------------------------------------------------------------------------
# Erdos-Renyi


def er_edge_probability(n: int, lam: float) -> float:
    """(1 + lam n^{-1/3}) / n, for 1 + lam n^{-1/3} in (0, n^{2/3}]."""
    factor = 1.0 + lam * n ** (-1.0 / 3.0)
    if not 0.0 < factor <= n ** (2.0 / 3.0):
        raise InputError(f"1 + lambda n^(-1/3) = {factor} leaves (0, n^(2/3)]")
    return factor / n


def _decode_pairs(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pair index k -> (i, j), i < j, enumerating pairs by j then i."""
    j = ((1.0 + np.sqrt(1.0 + 8.0 * idx.astype(np.float64))) / 2.0).astype(np.int64)
    tri = j * (j - 1) // 2
    # float rounding fix-ups
    over = tri > idx
    j[over] -= 1
    tri = j * (j - 1) // 2
    under = idx - tri >= j
    j[under] += 1
    tri = j * (j - 1) // 2
    return idx - tri, j


def er_edges(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Edges of G(n, p) by geometric skips over the n(n-1)/2 pair indices."""
    if not 0.0 <= p <= 1.0:
        raise InputError("edge probability outside [0, 1]")
    total = n * (n - 1) // 2
    if p == 0.0 or total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if p == 1.0:
        idx = np.arange(total, dtype=np.int64)
        return _decode_pairs(idx)
    chunks = []
    pos = -1
    batch = max(16, int(total * p * 1.05) + 64)
    while True:
        gaps = rng.geometric(p, size=batch).astype(np.int64)
        idx = pos + np.cumsum(gaps)
        if idx[-1] >= total:
            chunks.append(idx[idx < total])
            break
        chunks.append(idx)
        pos = int(idx[-1])
        batch = max(16, batch // 4)
    return _decode_pairs(np.concatenate(chunks))


def er_component_sizes(n: int, p: float, seed: int) -> np.ndarray:
    """Component sizes of one G(n, p) sample, sorted descending."""
    return np.sort(np.bincount(er_labels(n, p, seed)))[::-1]


def er_labels(n: int, p: float, seed: int) -> np.ndarray:
    i, j = er_edges(n, p, generator(seed, STREAM_MISC))
    g = coo_matrix((np.ones(i.size, dtype=np.int8), (i, j)), shape=(n, n))
    return connected_components(g, directed=False)[1]


def kappa_er(lam: float, n: int, n_samples: int, base_seed: int = 0) -> tuple[float, float]:
    """Estimate of E|C(v)| / n^{1/3} = n^{-4/3} E sum |C_i|^2 with standard error."""
    if n < 1000:
        raise InputError("n must be >= 1000")
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    p = er_edge_probability(n, lam)
    vals = np.empty(n_samples)
    for k in range(n_samples):
        s = er_component_sizes(n, p, base_seed + k).astype(float)
        vals[k] = np.sum(s * s) / n ** (4.0 / 3.0)
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return float(vals.mean()), se


def er_size_vector(n: int, lam: float, seed: int, k: int, p: float | None = None) -> np.ndarray:
    """Top-k rescaled sizes n^{-2/3}(|C_1|, ..., |C_k|), zero padded.

    ``p`` overrides the window parametrization (used for forced p = 0 or 1).
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if p is None:
        p = er_edge_probability(n, lam)
    sizes = er_component_sizes(n, p, seed)
    out = np.zeros(k)
    top = sizes[:k] / n ** (2.0 / 3.0)
    out[:top.size] = top
    return out
