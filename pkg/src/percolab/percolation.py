"""Seeded, coupled bond percolation on implicit graphs.

A :class:`PercolationSample` fixes one uniform ``U_e`` per edge, derived from
``(seed, edge id)`` on the fly; ``H_p`` is the set of edges with ``U_e <= p``.
All ``p`` share the same uniforms, so the standard monotone coupling holds
exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InputError
from .rng import STREAM_EDGES, derive_key, generator, uniform_at
from .substrate import TransitiveGraph


def _graph_args(g: TransitiveGraph):
    if g.is_hypercube:
        return g.m, np.zeros((1, 1), dtype=np.int64), True
    return g.m, np.ascontiguousarray(g.table, dtype=np.int64), False


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InputError(f"p={p} is not a probability")


class PercolationSample:
    """One realization of the coupled edge uniforms on ``graph``.

    Component labels, open-edge masks and stats are cached per queried ``p``.
    """

    def __init__(self, graph: TransitiveGraph, seed: int):
        self.graph = graph
        self.seed = int(seed)
        self.key = derive_key(self.seed, STREAM_EDGES)
        self._args = _graph_args(graph)
        self._labels: dict[float, np.ndarray] = {}
        self._masks: dict[float, np.ndarray] = {}

    @property
    def V(self) -> int:
        return self.graph.V

    def edge_uniform(self, v: int, slot: int) -> float:
        """U_e of the edge leaving ``v`` through neighbor slot ``slot``."""
        m, table, hyper = self._args
        w = v ^ (1 << slot) if hyper else int(table[v, slot])
        if w < v:
            slot = slot if hyper else int(np.flatnonzero(table[w] == v)[0])
            v = w
        return uniform_at(self.key, v * m + slot)

    def labels(self, p: float) -> np.ndarray:
        """Root label per vertex for ``H_p``."""
        _check_p(p)
        lab = self._labels.get(p)
        if lab is None:
            m, table, hyper = self._args
            lab = K.percolate_labels(self.V, m, table, hyper, self.key, p)
            self._labels[p] = lab
        return lab

    def mask(self, p: float) -> np.ndarray:
        """``V x m`` uint8 array of p-open (vertex, slot) pairs."""
        _check_p(p)
        mk = self._masks.get(p)
        if mk is None:
            m, table, hyper = self._args
            mk = K.open_mask(self.V, m, table, hyper, self.key, p)
            self._masks[p] = mk
        return mk

    def window_mask(self, lo: float, hi: float) -> np.ndarray:
        """Edges with ``lo < U_e <= hi`` (the sprinkle layer between two levels)."""
        m, table, hyper = self._args
        return K.open_mask_window(self.V, m, table, hyper, self.key, lo, hi)

    def component_sizes(self, p: float) -> np.ndarray:
        """Sizes indexed by vertex label (zero for non-roots)."""
        return np.bincount(self.labels(p), minlength=self.V)

    def component_of(self, p: float, v: int) -> np.ndarray:
        lab = self.labels(p)
        return np.flatnonzero(lab == lab[v])

    def components(self, p: float) -> list[np.ndarray]:
        """Vertex sets of all components, largest first (ties by smallest vertex)."""
        order, starts, _ = self._grouped(p)
        return [order[starts[c]:starts[c + 1]] for c in range(starts.size - 1)]

    def _grouped(self, p: float):
        lab = self.labels(p)
        sizes = np.bincount(lab, minlength=self.V)
        roots = np.flatnonzero(sizes)
        # rank components by size desc, then by smallest member
        first = np.full(self.V, self.V, dtype=np.int64)
        np.minimum.at(first, lab, np.arange(self.V))
        rank_order = np.lexsort((first[roots], -sizes[roots]))
        ranked_roots = roots[rank_order]
        rank_of_root = np.empty(self.V, dtype=np.int64)
        rank_of_root[ranked_roots] = np.arange(ranked_roots.size)
        comp = rank_of_root[lab]
        order = np.argsort(comp, kind="stable")
        counts = sizes[ranked_roots]
        starts = np.concatenate(([0], np.cumsum(counts)))
        return order, starts, comp

    def stats(self, p: float, diameters: bool = False, exact_floor: int = 256,
              n_peripheral: int = 32) -> "ComponentStats":
        sizes = self.component_sizes(p)
        sizes = np.sort(sizes[sizes > 0])[::-1]
        st = ComponentStats(sizes=sizes, V=self.V)
        if diameters:
            order, starts, _ = self._grouped(p)
            m, table, hyper = self._args
            d, ex = K.component_diameters(self.V, m, table, hyper, self.mask(p), order,
                                          starts, exact_floor, n_peripheral)
            st.diameters = d
            st.diam_exact = ex.astype(bool)
        return st

    def distances_from(self, p: float, src: int, maxdepth: int = -1) -> np.ndarray:
        """BFS distances in ``H_p`` from ``src`` (-1 where unreachable)."""
        m, table, hyper = self._args
        dist = -np.ones(self.V, dtype=np.int64)
        queue = np.empty(self.V, dtype=np.int64)
        K.bfs(m, table, hyper, self.mask(p), src, maxdepth, dist, queue)
        return dist


@dataclass
class ComponentStats:
    """Sorted component sizes of one configuration, with optional diameters.

    ``diameters[i]`` belongs to the i-th largest component; ``diam_exact``
    marks values known exactly (the rest are lower bounds).
    """

    sizes: np.ndarray
    V: int
    diameters: np.ndarray | None = None
    diam_exact: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        if self.sizes.size and (np.any(self.sizes <= 0) or np.any(np.diff(self.sizes) > 0)):
            raise InputError("sizes must be positive and weakly decreasing")

    @property
    def rescaled(self) -> np.ndarray:
        return self.sizes / self.V ** (2.0 / 3.0)

    def top(self, k: int) -> np.ndarray:
        """First k rescaled sizes, zero padded."""
        out = np.zeros(k)
        r = self.rescaled[:k]
        out[:r.size] = r
        return out

    @property
    def l2(self) -> float:
        return float(np.sum(self.rescaled**2))

    @property
    def l4(self) -> float:
        return float(np.sum(self.rescaled**4))

    @property
    def sum_sq(self) -> float:
        return float(np.sum(self.sizes.astype(float) ** 2))


def percolate(sample: PercolationSample, p: float) -> ComponentStats:
    """Exact components of ``H_p`` for this sample, sizes sorted descending."""
    return sample.stats(p)


def susceptibility(g: TransitiveGraph, p: float, n_samples: int, base_seed: int = 0,
                   estimator: str = "vertex", histogram: bool = False):
    """Monte Carlo estimate of chi(p) = E_p|C(v)| with its standard error.

    ``estimator="vertex"`` averages |C(0)| (vertex 0 stands for every vertex by
    transitivity). ``estimator="l2"`` averages sum_i |C_i|^2 / V, which has
    the same mean and far smaller variance near criticality. With
    ``histogram=True`` the size-biased histogram of |C(0)| is also returned.
    """
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    _check_p(p)
    vals = np.empty(n_samples)
    for k in range(n_samples):
        s = PercolationSample(g, base_seed + k)
        if estimator == "vertex":
            lab = s.labels(p)
            vals[k] = np.count_nonzero(lab == lab[0])
        elif estimator == "l2":
            vals[k] = s.stats(p).sum_sq / g.V
        else:
            raise InputError(f"unknown estimator {estimator!r}")
    se = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("nan")
    if histogram:
        return float(vals.mean()), se, np.bincount(vals.astype(np.int64))
    return float(vals.mean()), se


class SusceptibilityCurves:
    """Per-seed step functions p -> sum_i |C_i(H_p)|^2 on [0, p_max].

    Built once by sorting the edges with ``U_e <= p_max`` and inserting them in
    order; every later query ``chi(p)`` reuses the same seeds (common random
    numbers), which makes chi-hat exactly monotone in p.
    """

    def __init__(self, g: TransitiveGraph, seeds, p_max: float):
        self.graph = g
        self.p_max = float(p_max)
        self.seeds: list[int] = []
        self._thr: list[np.ndarray] = []
        self._s2: list[np.ndarray] = []
        self.extend(seeds)

    def extend(self, seeds) -> None:
        m, table, hyper = _graph_args(self.graph)
        for sd in seeds:
            key = derive_key(int(sd), STREAM_EDGES)
            us, ws, uu = K.edges_below(self.graph.V, m, table, hyper, key, self.p_max)
            order = np.argsort(uu, kind="stable")
            self._thr.append(uu[order])
            self._s2.append(K.s2_curve(self.graph.V, us[order], ws[order]))
            self.seeds.append(int(sd))

    def __len__(self) -> int:
        return len(self.seeds)

    def values(self, p: float) -> np.ndarray:
        """chi-hat contributions sum|C|^2/V of every seed at p."""
        if p > self.p_max:
            raise InputError(f"p={p} beyond curve range {self.p_max}")
        V = float(self.graph.V)
        out = np.empty(len(self.seeds))
        for k, (thr, s2) in enumerate(zip(self._thr, self._s2)):
            j = np.searchsorted(thr, p, side="right")
            out[k] = (s2[j - 1] if j > 0 else V) / V
        return out

    def chi(self, p: float) -> tuple[float, float]:
        v = self.values(p)
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        return float(v.mean()), se


def ball(sample: PercolationSample, p: float, x: int, r: int) -> tuple[int, bool]:
    """(|B(x,r)|, boundary nonempty) in the intrinsic metric of ``H_p``.

    The boundary is the set of vertices at distance exactly r; for r = 0 it is
    {x}, so the flag is always True there.
    """
    if r < 0:
        raise InputError("radius must be nonnegative")
    dist = sample.distances_from(p, x, maxdepth=r)
    reached = dist >= 0
    return int(np.count_nonzero(reached)), bool(np.any(dist == r))


def long_thin_scan(sample: PercolationSample, p: float, R: int, M: int,
                   cap: int | None = None, subsample_seed: int = 0) -> tuple[int, int]:
    """Number of vertices whose R-ball has at most M vertices yet a nonempty boundary.

    Returns ``(count, scanned)``. All V vertices are scanned unless V exceeds
    ``cap``, in which case a uniform subsample of ``cap`` vertices is used.
    """
    if R < 1 or M < 1:
        raise InputError("R and M must be >= 1")
    V = sample.V
    if cap is not None and V > cap:
        verts = np.sort(generator(subsample_seed).choice(V, size=cap, replace=False))
    else:
        verts = np.arange(V)
    m, table, hyper = sample._args
    count = K.ball_scan(V, m, table, hyper, sample.mask(p), int(R), int(M), verts.astype(np.int64))
    return int(count), int(verts.size)


def tail_and_l4_stats(stats: ComponentStats, k: int) -> tuple[float, float, bool]:
    """Normalized tails (sum_{i>=k}|C_i|^4 / V^{8/3}, sum_{i>=k} diam_i^4 / V^{4/3}).

    ``k`` is 1-based. Components without a computed diameter use the bound
    size-1; the third value flags whether any such bound (or a lower-bound
    diameter) entered the sum.
    """
    if k < 1:
        raise InputError("k is 1-based")
    V = stats.V
    tail = stats.sizes[k - 1:].astype(float)
    if tail.size == 0:
        return 0.0, 0.0, False
    mass = float(np.sum(tail**4) / V ** (8.0 / 3.0))
    if stats.diameters is None:
        diam = tail - 1.0
        flagged = bool(np.any(diam > 0))
    else:
        diam = stats.diameters[k - 1:].astype(float)
        flagged = not bool(np.all(stats.diam_exact[k - 1:]))
    return mass, float(np.sum(diam**4) / V ** (4.0 / 3.0)), flagged


def cluster_tail(g: TransitiveGraph, p: float, ks, n_samples: int, base_seed: int = 0):
    """Empirical P(|C(0)| >= k) * sqrt(k) for each k (diagnostic only)."""
    sizes = np.empty(n_samples)
    for j in range(n_samples):
        lab = PercolationSample(g, base_seed + j).labels(p)
        sizes[j] = np.count_nonzero(lab == lab[0])
    ks = np.asarray(ks, dtype=float)
    return np.array([np.mean(sizes >= k) * np.sqrt(k) for k in ks])
