"""Aldous multiplicative random graphs over a weight vector.

Pairs {i, j} are joined independently with probability 1 - exp(-q w_i w_j).
Two samplers: a direct one over the pair list (quadratic for small n, bucketed
geometric skipping for large n), and Limic's exploration process driven by
exponential clocks E_i ~ Exp(q w_i).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._kernels import find
from .errors import InputError
from .limit_oracle import _decode_pairs
from .rng import STREAM_CLOCKS, STREAM_PAIRS, derive_key, exponentials, generator, uniform_at

QUADRATIC_MAX_N = 10_000


class WeightVector:
    """Positive weights w_1..w_n with rate q and cached moments sigma_r."""

    def __init__(self, weights, q: float):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise InputError("need a nonempty 1-d weight vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InputError("weights must be positive and finite")
        if not q >= 0 or not math.isfinite(q):
            raise InputError("q must be a finite number >= 0")
        self.w = w
        self.q = float(q)
        self.sigma1, self.sigma2, self.sigma3 = (math.fsum((w**r).tolist()) for r in (1, 2, 3))

    @property
    def n(self) -> int:
        return self.w.size

    def sigma(self, r: float) -> float:
        return math.fsum((self.w**r).tolist())

    def with_q(self, q: float) -> WeightVector:
        return WeightVector(self.w, q)


@njit(cache=True)
def labels_from_edges(n, ei, ej):
    parent = np.arange(n)
    for k in range(ei.size):
        a = find(parent, ei[k])
        b = find(parent, ej[k])
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    for v in range(n):
        parent[v] = find(parent, v)
    return parent


@njit(cache=True)
def _quadratic_edges(w, q, key):
    n = w.size
    cnt = 0
    ei = np.empty(16, dtype=np.int64)
    ej = np.empty(16, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            p = -np.expm1(-q * w[i] * w[j])
            if uniform_at(key, i * n + j) < p:
                if cnt == ei.size:
                    ei = np.concatenate((ei, np.empty(cnt, dtype=np.int64)))
                    ej = np.concatenate((ej, np.empty(cnt, dtype=np.int64)))
                ei[cnt] = i
                ej[cnt] = j
                cnt += 1
    return ei[:cnt], ej[:cnt]


def _skip_indices(total: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in [0, total) kept independently with probability p."""
    if p <= 0 or total <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    out = []
    pos = -1
    batch = max(16, int(total * p * 1.1) + 32)
    while True:
        idx = pos + np.cumsum(rng.geometric(p, size=batch).astype(np.int64))
        if idx[-1] >= total:
            out.append(idx[idx < total])
            break
        out.append(idx)
        pos = int(idx[-1])
        batch = max(16, batch // 4)
    return np.concatenate(out)


def _bucketed_edges(w: np.ndarray, q: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges by geometric skipping inside power-of-two weight buckets.

    Within a bucket pair every candidate is proposed at the pair's largest
    probability and thinned to its own; since weights differ by at most a
    factor 2 per bucket, at most 4 proposals are spent per realized edge.
    """
    rng = generator(seed, STREAM_PAIRS)
    b = np.floor(np.log2(w)).astype(np.int64)
    order = np.argsort(b, kind="stable")
    bs = b[order]
    cuts = np.flatnonzero(np.diff(bs)) + 1
    groups = np.split(order, cuts)
    wmax = [w[g].max() for g in groups]
    ei, ej = [], []
    for x in range(len(groups)):
        gx = groups[x]
        for y in range(x, len(groups)):
            gy = groups[y]
            pmax = -math.expm1(-q * wmax[x] * wmax[y])
            if x == y:
                total = gx.size * (gx.size - 1) // 2
                k = _skip_indices(total, pmax, rng)
                a, c = _decode_pairs(k)
                i, j = gx[a], gx[c]
            else:
                total = gx.size * gy.size
                k = _skip_indices(total, pmax, rng)
                i, j = gx[k // gy.size], gy[k % gy.size]
            if i.size == 0:
                continue
            p = -np.expm1(-q * w[i] * w[j])
            keep = rng.random(i.size) * pmax < p
            ei.append(i[keep])
            ej.append(j[keep])
    if not ei:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(ei), np.concatenate(ej)


@dataclass
class MultPartition:
    labels: np.ndarray  # component root (smallest index) per element
    weights: np.ndarray  # component weights, sorted descending
    n_edges: int

    @property
    def sum_sq(self) -> float:
        return float(np.sum(self.weights**2))


def _partition(w: np.ndarray, ei: np.ndarray, ej: np.ndarray) -> MultPartition:
    lab = labels_from_edges(w.size, ei.astype(np.int64), ej.astype(np.int64))
    cw = np.bincount(lab, weights=w)
    cw = cw[np.bincount(lab) > 0]
    return MultPartition(lab, np.sort(cw)[::-1], int(ei.size))


def direct_edges(wv: WeightVector, seed: int, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    if method == "auto":
        method = "quadratic" if wv.n <= QUADRATIC_MAX_N else "bucketed"
    if wv.q == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if method == "quadratic":
        return _quadratic_edges(wv.w, wv.q, derive_key(seed, STREAM_PAIRS))
    if method == "bucketed":
        return _bucketed_edges(wv.w, wv.q, seed)
    raise InputError(f"unknown method {method!r}")


def sample_direct(wv: WeightVector, seed: int, method: str = "auto") -> MultPartition:
    """Component partition of one realization, weights sorted descending."""
    ei, ej = direct_edges(wv, seed, method)
    return _partition(wv.w, ei, ej)


@dataclass
class ExplorationTrace:
    clocks: np.ndarray  # E_i, indexed like the weights
    order: np.ndarray  # indices sorted by clock (ties by index)
    jump_times: np.ndarray
    y_before: np.ndarray  # Y just before each jump
    y_after: np.ndarray
    infimum: np.ndarray  # running infimum just before each jump
    starts: np.ndarray  # excursion start times
    ends: np.ndarray
    comp_weights: np.ndarray  # per excursion, discovery order
    local_times: np.ndarray  # L per excursion, discovery order
    labels: np.ndarray  # excursion index per element

    @property
    def weights_sorted(self) -> np.ndarray:
        return np.sort(self.comp_weights)[::-1]

    @property
    def t_end(self) -> float:
        return float(self.ends[-1])


@njit(cache=True)
def _explore(E, w, order):
    n = E.size
    y_before = np.empty(n)
    y_after = np.empty(n)
    inf_before = np.empty(n)
    exc = np.empty(n, dtype=np.int64)
    starts = np.empty(n)
    ends = np.empty(n)
    cw = np.empty(n)
    lt = np.empty(n)
    jumped = 0.0
    inf = 0.0
    end = -1.0
    ne = 0
    for k in range(n):
        i = order[k]
        t = E[i]
        y = jumped - t
        if t >= end:
            # the walk sits at its running infimum: a new excursion starts
            inf = y
            starts[ne] = t
            ends[ne] = t + w[i]
            cw[ne] = w[i]
            lt[ne] = -y
            ne += 1
        else:
            ends[ne - 1] += w[i]
            cw[ne - 1] += w[i]
        end = ends[ne - 1]
        y_before[k] = y
        inf_before[k] = inf
        jumped += w[i]
        y_after[k] = jumped - t
        exc[i] = ne - 1
    return y_before, y_after, inf_before, exc, starts[:ne], ends[:ne], cw[:ne], lt[:ne]


def sample_exploration(wv: WeightVector, seed: int) -> ExplorationTrace:
    """Limic exploration: jumps of size w_i at E_i ~ Exp(q w_i), drift -1.

    An excursion above the running infimum starts at a jump taken from the
    infimum and lasts exactly the total size of its jumps; L is the depth of
    the infimum at its start.
    """
    if not wv.q > 0:
        raise InputError("q must be > 0: with q = 0 no clock ever rings")
    E = exponentials(derive_key(seed, STREAM_CLOCKS), np.arange(wv.n), wv.q * wv.w)
    order = np.argsort(E, kind="stable")
    yb, ya, ib, exc, st, en, cw, lt = _explore(E, wv.w, order)
    return ExplorationTrace(E, order, E[order], yb, ya, ib, st, en, cw, lt, exc)


@dataclass
class ConditionReport:
    sigma3_over_sigma2_cubed: float
    q_minus_inv_sigma2: float
    max_over_sigma2: float
    max_over_sigma2_pow: float
    sigma2_pow_r0_over_min: float
    eta0: float
    r0: float


def check_conditions(wv: WeightVector, eta0: float = 0.1, r0: float = 13.0) -> ConditionReport:
    if not 0 < eta0 <= 1 / 6:
        raise InputError("eta0 must lie in (0, 1/6]")
    if not r0 > 12:
        raise InputError("r0 must exceed 12")
    s2, s3 = wv.sigma2, wv.sigma3
    wmax, wmin = float(wv.w.max()), float(wv.w.min())
    return ConditionReport(
        sigma3_over_sigma2_cubed=s3 / s2**3,
        q_minus_inv_sigma2=wv.q - 1.0 / s2,
        max_over_sigma2=wmax / s2,
        max_over_sigma2_pow=wmax / s2 ** (1.5 + eta0),
        sigma2_pow_r0_over_min=s2**r0 / wmin,
        eta0=float(eta0),
        r0=float(r0),
    )


def susceptibility_mult(wv: WeightVector, n_samples: int, base_seed: int = 0,
                        mode: str = "direct") -> tuple[float, float]:
    """Monte Carlo mean of sum of squared component weights, with standard error."""
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    if wv.q == 0:
        return wv.sigma2, 0.0
    vals = np.empty(n_samples)
    for k in range(n_samples):
        if mode == "direct":
            vals[k] = sample_direct(wv, base_seed + k).sum_sq
        elif mode == "exploration":
            vals[k] = float(np.sum(sample_exploration(wv, base_seed + k).comp_weights ** 2))
        else:
            raise InputError(f"unknown mode {mode!r}")
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else float("nan")
    return float(vals.mean()), se
