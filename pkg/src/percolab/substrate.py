"""Implicit vertex-transitive graphs and non-backtracking random walk kernels.

The hypercube is never materialized: neighbors are bit flips. For the
non-backtracking walk (NBRW) two representations are provided:

* the full directed-edge dynamic program, valid for any regular graph given
  by a neighbor table (the walk is Markov on directed edges), and
* a hypercube-only reduction that keeps, for a walk started at 0, the mass per
  (Hamming weight, last-flipped-coordinate-is-set) class. It has ``2(m+1)``
  states, so mixing times are computable for m around 30.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import comb

from .errors import InputError, UnsupportedGraphError

MAX_DIRECTED_STATES = 10**8


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += (x & np.uint64(1)).astype(np.int64)
        x = x >> np.uint64(1)
    return out


@dataclass(frozen=True)
class TransitiveGraph:
    """A regular, vertex-transitive graph with integer vertex ids in [0, V).

    ``kind`` is ``"hypercube"`` (implicit) or ``"adjacency"`` (explicit
    ``V x m`` neighbor table). Transitivity of adjacency graphs is assumed,
    not checked.
    """

    kind: str
    m: int
    V: int
    table: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "hypercube":
            if self.V != 1 << self.m:
                raise InputError("hypercube requires V = 2**m")
        elif self.kind == "adjacency":
            if self.table is None or self.table.shape != (self.V, self.m):
                raise InputError("adjacency graph needs a V x m neighbor table")
        else:
            raise InputError(f"unknown graph kind {self.kind!r}")
        if self.m < 1:
            raise InputError("degree must be positive")

    @property
    def is_hypercube(self) -> bool:
        return self.kind == "hypercube"

    def neighbor_table(self) -> np.ndarray:
        """``V x m`` array of neighbors (materializes the hypercube)."""
        if self.table is not None:
            return self.table
        v = np.arange(self.V, dtype=np.int64)[:, None]
        return v ^ (np.int64(1) << np.arange(self.m, dtype=np.int64))[None, :]

    def reverse_slots(self) -> np.ndarray:
        """``rev[b, l]`` = slot of ``b`` in the neighbor list of ``table[b, l]``."""
        if self.is_hypercube:
            return np.broadcast_to(np.arange(self.m), (self.V, self.m))
        tab = self.neighbor_table()
        rev = np.empty_like(tab)
        for b in range(self.V):
            for slot, c in enumerate(tab[b]):
                hits = np.flatnonzero(tab[c] == b)
                if hits.size != 1:
                    raise InputError("neighbor relation is not symmetric")
                rev[b, slot] = hits[0]
        return rev


def hypercube(m: int) -> TransitiveGraph:
    if m < 1 or m > 40:
        raise InputError("hypercube dimension must be in [1, 40]")
    return TransitiveGraph("hypercube", m, 1 << m)


def from_neighbor_table(table) -> TransitiveGraph:
    """Wrap an explicit regular graph; validates degree, loops and duplicates."""
    tab = np.asarray(table, dtype=np.int64)
    if tab.ndim != 2:
        raise InputError("neighbor table must be 2-dimensional")
    V, m = tab.shape
    if tab.min(initial=0) < 0 or tab.max(initial=0) >= V:
        raise InputError("neighbor ids out of range")
    for v in range(V):
        row = tab[v]
        if np.any(row == v) or len(set(row.tolist())) != m:
            raise InputError(f"vertex {v}: self-loop or duplicate neighbor")
    g = TransitiveGraph("adjacency", m, V, tab)
    g.reverse_slots()  # symmetry check
    return g


def neighbors(g: TransitiveGraph, v: int) -> list[int]:
    """Neighbors of ``v``; ascending bit index for the hypercube."""
    if not 0 <= v < g.V:
        raise InputError(f"vertex {v} out of range [0, {g.V})")
    if g.is_hypercube:
        return [v ^ (1 << i) for i in range(g.m)]
    return g.table[v].tolist()


def alpha_m(m: int) -> float:
    """Default hypercube sequence alpha_m = log(m)/m."""
    return math.log(m) / m


# ----------------------------------------------------------------------------
# full directed-edge DP


def _check_walk(g: TransitiveGraph, t: int) -> None:
    if t < 0:
        raise InputError("step count must be nonnegative")
    if g.m < 2 and t >= 2:
        raise UnsupportedGraphError("non-backtracking walk needs degree >= 2 beyond one step")
    if g.V * g.m > MAX_DIRECTED_STATES:
        raise UnsupportedGraphError("directed-edge state space exceeds 1e8")


def _edge_mass_steps(g: TransitiveGraph, u: int, t_max: int) -> Iterator[np.ndarray]:
    """Yield the directed-edge mass for t = 1..t_max.

    ``mass[b, k]`` is the probability of sitting at ``b`` having arrived from
    ``table[b, k]``.
    """
    tab = g.neighbor_table()
    rev = np.asarray(g.reverse_slots())
    mass = np.zeros((g.V, g.m))
    mass[tab[u], rev[u]] = 1.0 / g.m
    yield mass
    for _ in range(1, t_max):
        out = (mass.sum(axis=1)[:, None] - mass) / (g.m - 1)
        nxt = np.empty_like(mass)
        nxt[tab, rev] = out
        mass = nxt
        yield mass


def nbrw_distribution_full(g: TransitiveGraph, u: int, t: int) -> np.ndarray:
    """p^t(u, .) as a length-V vector, by the directed-edge DP."""
    _check_walk(g, t)
    if not 0 <= u < g.V:
        raise InputError("start vertex out of range")
    if t == 0:
        out = np.zeros(g.V)
        out[u] = 1.0
        return out
    for mass in _edge_mass_steps(g, u, t):
        pass
    return mass.sum(axis=1)


def nbrw_series_full(g: TransitiveGraph, u: int, t_max: int) -> np.ndarray:
    """Rows p^0(u,.), ..., p^{t_max}(u,.) stacked into a (t_max+1) x V array."""
    _check_walk(g, t_max)
    rows = np.zeros((t_max + 1, g.V))
    rows[0, u] = 1.0
    if t_max >= 1:
        for t, mass in enumerate(_edge_mass_steps(g, u, t_max), start=1):
            rows[t] = mass.sum(axis=1)
    return rows


# ----------------------------------------------------------------------------
# hypercube symmetry reduction


def hypercube_weight_profile(m: int, t_max: int) -> np.ndarray:
    """Mass per Hamming weight of a NBRW from 0 on {0,1}^m.

    Returns an array ``f`` of shape ``(t_max+1, m+1)`` with ``f[t, k]`` the
    probability of being at weight ``k`` after ``t`` steps. The state tracks
    whether the last-flipped coordinate is currently set (``s=1``) or not.
    """
    if t_max < 0:
        raise InputError("step count must be nonnegative")
    if m < 2 and t_max >= 2:
        raise UnsupportedGraphError("non-backtracking walk needs degree >= 2 beyond one step")
    f = np.zeros((t_max + 1, m + 1))
    f[0, 0] = 1.0
    if t_max == 0:
        return f
    k = np.arange(m + 1)
    s1 = np.zeros(m + 1)  # last flipped coordinate set
    s0 = np.zeros(m + 1)  # last flipped coordinate unset
    s1[1] = 1.0
    f[1] = s1
    for t in range(2, t_max + 1):
        n1 = np.zeros(m + 1)
        n0 = np.zeros(m + 1)
        # from s=1 at weight k: k-1 set coords (-> k-1, s=0), m-k unset (-> k+1, s=1)
        down1 = s1 * np.maximum(k - 1, 0) / (m - 1)
        up1 = s1 * (m - k) / (m - 1)
        # from s=0 at weight k: k set coords (-> k-1, s=0), m-k-1 unset (-> k+1, s=1)
        down0 = s0 * k / (m - 1)
        up0 = s0 * np.maximum(m - k - 1, 0) / (m - 1)
        n0[:-1] += down1[1:] + down0[1:]
        n1[1:] += up1[:-1] + up0[:-1]
        s0, s1 = n0, n1
        f[t] = s0 + s1
    return f


def _weight_of_vertex(m: int) -> np.ndarray:
    return popcount(np.arange(1 << m, dtype=np.uint64))


def nbrw_distribution_reduced(m: int, u: int, t: int) -> np.ndarray:
    """p^t(u, .) on the hypercube expanded from the weight profile."""
    if not 0 <= u < 1 << m:
        raise InputError("start vertex out of range")
    prof = hypercube_weight_profile(m, t)[t]
    per_vertex = prof / comb(m, np.arange(m + 1), exact=False)
    w = popcount(np.arange(1 << m, dtype=np.uint64) ^ np.uint64(u))
    return per_vertex[w]


def nbrw_distribution(g: TransitiveGraph, u: int, t: int) -> np.ndarray:
    """p^t(u, z) for all z, as a dense vector indexed by vertex id."""
    if g.is_hypercube:
        return nbrw_distribution_reduced(g.m, u, t)
    return nbrw_distribution_full(g, u, t)


def _averaged_max(g: TransitiveGraph, t_max: int, method: str) -> np.ndarray:
    """max_y (p^t + p^{t+1})/2 for t = 0..t_max."""
    if method == "reduced":
        prof = hypercube_weight_profile(g.m, t_max + 1)
        per = prof / comb(g.m, np.arange(g.m + 1), exact=False)[None, :]
        return (0.5 * (per[:-1] + per[1:])).max(axis=1)
    rows = nbrw_series_full(g, 0, t_max + 1)
    return (0.5 * (rows[:-1] + rows[1:])).max(axis=1)


def mixing_time(g: TransitiveGraph, xi: float, t_max: int, method: str = "auto") -> int:
    """Least t <= t_max with max_y (p^t(x,y) + p^{t+1}(x,y))/2 <= (1+xi)/V.

    Returns ``t_max + 1`` when no such t exists. Degree-1 graphs are excluded
    (the walk is not defined past one step). ``method`` selects the
    hypercube reduction (``"reduced"``) or the directed-edge DP (``"full"``).
    """
    if xi <= 0:
        raise InputError("xi must be positive")
    if t_max < 1:
        raise InputError("t_max must be >= 1")
    if g.m < 2:
        raise UnsupportedGraphError("mixing time is undefined for degree-1 graphs")
    if method == "auto":
        method = "reduced" if g.is_hypercube else "full"
    avg = _averaged_max(g, t_max, method)
    hits = np.flatnonzero(avg <= (1.0 + xi) / g.V)
    return int(hits[0]) if hits.size else t_max + 1


def mixing_profile(g: TransitiveGraph, xi: float, t_max: int, method: str = "auto"):
    """Rows ``(t, max_violation, mixed)`` with violation = V*max avg - 1."""
    if method == "auto":
        method = "reduced" if g.is_hypercube else "full"
    avg = _averaged_max(g, t_max, method)
    viol = avg * g.V - 1.0
    return [(t, float(v), bool(v <= xi)) for t, v in enumerate(viol)]


def mixing_ratio(g: TransitiveGraph, m0: int, alpha: float) -> float:
    """m0 / (V^{1/15} alpha): the diagnostic ratio for the m0 growth condition."""
    return m0 / (g.V ** (1.0 / 15.0) * alpha)


# ----------------------------------------------------------------------------
# random-walk triangle diagram


def walsh_hadamard(x: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform of a length-2^m vector."""
    a = np.array(x, dtype=float)
    n = a.size
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1)
        a = a.reshape(n)
        h *= 2
    return a


def _kernel_rows(g: TransitiveGraph, m0: int) -> np.ndarray:
    """k_t(z) = p^t(0, z) for t = 0..m0 (hypercube kernels are functions of x XOR y)."""
    prof = hypercube_weight_profile(g.m, m0)
    per = prof / comb(g.m, np.arange(g.m + 1), exact=False)[None, :]
    return per[:, _weight_of_vertex(g.m)]


def triangle_diagram_rw(g: TransitiveGraph, x: int, y: int, m0: int) -> float:
    """Sum over u, v and t1+t2+t3 >= 3 (each t_i in [0, m0]) of p^t1(x,u) p^t2(u,v) p^t3(v,y).

    The unrestricted triple sum factorizes through S = sum_t p^t; the terms
    with t1+t2+t3 <= 2 are subtracted explicitly. On the hypercube the
    kernels are convolutions on Z_2^m and are applied in Walsh-Hadamard
    space; on explicit graphs S is applied three times to a row vector.
    """
    if m0 < 1:
        raise InputError("m0 must be >= 1")
    for v in (x, y):
        if not 0 <= v < g.V:
            raise InputError("vertex out of range")
    if g.m < 2 and m0 >= 2:
        raise UnsupportedGraphError("non-backtracking walk needs degree >= 2 beyond one step")

    if g.is_hypercube:
        k = _kernel_rows(g, m0)
        s = k.sum(axis=0)
        V = g.V
        s_hat = walsh_hadamard(s)
        k1_hat = walsh_hadamard(k[1])
        triple = walsh_hadamard(s_hat**3)[x ^ y] / V
        low = float(x == y) + 3.0 * k[1][x ^ y]
        if m0 >= 2:
            low += 3.0 * k[2][x ^ y]
        low += 3.0 * walsh_hadamard(k1_hat**2)[x ^ y] / V
        return float(triple - low)

    # explicit graph: S as a dense V x V operator built from per-vertex series
    if g.V > 4096:
        raise UnsupportedGraphError("dense triangle computation capped at V = 4096")
    series = np.stack([nbrw_series_full(g, u, m0) for u in range(g.V)], axis=1)  # t, u, z
    S = series.sum(axis=0)
    K1 = series[1]
    row = np.zeros(g.V)
    row[x] = 1.0
    triple = ((row @ S) @ S) @ S
    low = float(x == y) + 3.0 * K1[x, y] + 3.0 * (K1[x] @ K1)[y]
    if m0 >= 2:
        low += 3.0 * series[2][x, y]
    return float(triple[y] - low)
