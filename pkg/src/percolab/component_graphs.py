"""Component graphs over a fixed subcritical configuration H_{p_s}.

Vertices are the p_s-components of size >= M_s, weighted by w_A = |A| V^{-2/3}.

* G_x (multiplicative): A ~ B with probability q_AB = 1 - exp(-q w_A w_B).
* G_s (sprinkled): A ~ B with probability p_AB = 1 - exp(-q Delta_AB / (m V^{1/3})),
  Delta_AB the number of host edges between A and B; equivalently, some such
  edge has its uniform in (p_s, p'_c].

Both graphs read one uniform U_AB per pair, keyed by the sorted smallest
vertices of A and B, so they differ only where U_AB falls between p_AB and q_AB.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .calibration import WindowParams
from .errors import InputError
from .multiplicative import QUADRATIC_MAX_N, _bucketed_edges, labels_from_edges
from .percolation import PercolationSample
from .rng import STREAM_PAIRS, STREAM_SPRINKLE, derive_key, generator, uniform_at, uniforms
from .substrate import TransitiveGraph

MATRIX_CAP = 2000


@dataclass
class WeightedComponents:
    """Retained p_s-components (rank order: size desc, then smallest vertex)."""

    sample: PercolationSample
    p_s: float
    M_s: int
    order: np.ndarray  # vertices grouped by component rank
    starts: np.ndarray  # component c occupies order[starts[c]:starts[c+1]]
    comp_all: np.ndarray  # rank of the p_s-component of each vertex
    n: int  # retained components are ranks 0..n-1

    @property
    def graph(self) -> TransitiveGraph:
        return self.sample.graph

    @property
    def V(self) -> int:
        return self.sample.V

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.starts[:self.n + 1])

    @property
    def weights(self) -> np.ndarray:
        return self.sizes / self.V ** (2.0 / 3.0)

    @property
    def ids(self) -> np.ndarray:
        """Smallest vertex of each retained component (its coupling key)."""
        return self.order[self.starts[:self.n]]

    @property
    def comp_of(self) -> np.ndarray:
        """Retained component index per vertex, -1 outside V_*."""
        return np.where(self.comp_all < self.n, self.comp_all, -1)

    @property
    def v_star_size(self) -> int:
        return int(self.starts[self.n])

    @property
    def excluded_mass(self) -> int:
        return self.V - self.v_star_size

    @property
    def flagged(self) -> bool:
        return self.n == 0

    @property
    def n_all(self) -> int:
        return self.starts.size - 1

    def vertices(self, c: int) -> np.ndarray:
        if not 0 <= c < self.n_all:
            raise InputError(f"no component {c}")
        return self.order[self.starts[c]:self.starts[c + 1]]

    def restrict(self, k: int) -> WeightedComponents:
        """Keep only the k largest retained components (the rest count as excluded)."""
        return WeightedComponents(self.sample, self.p_s, self.M_s, self.order, self.starts,
                                  self.comp_all, min(self.n, int(k)))


def extract_weighted_components(sample: PercolationSample, window: WindowParams | None = None, *,
                                p_s: float | None = None, M_s: int | None = None) -> WeightedComponents:
    """Components of H_{p_s} with at least M_s vertices (from ``window`` unless overridden)."""
    if window is not None:
        if window.m != sample.graph.m or window.V != sample.V:
            raise InputError("window was derived for a different graph")
        p_s = window.p_s if p_s is None else p_s
        M_s = window.M_s if M_s is None else M_s
    if p_s is None or M_s is None:
        raise InputError("need a window or explicit p_s and M_s")
    if M_s < 1:
        raise InputError("M_s must be >= 1")
    order, starts, comp = sample._grouped(p_s)
    sizes = np.diff(starts)
    n = int(np.count_nonzero(sizes >= M_s))
    return WeightedComponents(sample, float(p_s), int(M_s), order, starts, comp, n)


# ----------------------------------------------------------------------------
# host edges between components


def _owned_edges_by_slot(g: TransitiveGraph):
    """Yield (v, w, slot) arrays of the edges owned by their smaller endpoint."""
    v_all = np.arange(g.V, dtype=np.int64)
    for i in range(g.m):
        if g.is_hypercube:
            v = v_all[((v_all >> i) & 1) == 0]
            w = v | (1 << i)
        else:
            w = g.table[:, i].astype(np.int64)
            keep = v_all < w
            v, w = v_all[keep], w[keep]
        yield v, w, i


def cross_edges(g: TransitiveGraph, comp: np.ndarray, key=None):
    """Host edges joining two different components of the labelling ``comp``.

    Vertices with ``comp < 0`` are ignored. Returns (a, b, u) with a < b the
    component indices and u the edge uniforms (None without ``key``).
    """
    A, B, U = [], [], []
    for v, w, i in _owned_edges_by_slot(g):
        ca, cb = comp[v], comp[w]
        keep = (ca >= 0) & (cb >= 0) & (ca != cb)
        ca, cb = ca[keep], cb[keep]
        A.append(np.minimum(ca, cb))
        B.append(np.maximum(ca, cb))
        if key is not None:
            U.append(uniforms(key, v[keep] * g.m + i))
    a = np.concatenate(A) if A else np.zeros(0, np.int64)
    b = np.concatenate(B) if B else np.zeros(0, np.int64)
    u = (np.concatenate(U) if U else np.zeros(0)) if key is not None else None
    return a, b, u


def adjacent_pairs(wc: WeightedComponents) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All pairs (a < b) of retained components with Delta_ab > 0, and Delta."""
    a, b, _ = cross_edges(wc.graph, wc.comp_of)
    if a.size == 0:
        return a, b, np.zeros(0, np.int64)
    keys, counts = np.unique(a * wc.n + b, return_counts=True)
    return keys // wc.n, keys % wc.n, counts


def edge_count(g: TransitiveGraph, A, B) -> int:
    """Number of host edges with one endpoint in A and the other in B (disjoint sets).

    Walks the smaller set and tests each neighbor against a hash set of the larger.
    """
    A = [int(x) for x in A]
    B = [int(x) for x in B]
    sa, sb = set(A), set(B)
    if sa == sb:
        raise InputError("A and B must differ")
    if sa & sb:
        raise InputError("A and B must be disjoint")
    small, big = (A, sb) if len(A) <= len(B) else (B, sa)
    table = None if g.is_hypercube else g.table
    count = 0
    for v in small:
        for i in range(g.m):
            w = v ^ (1 << i) if table is None else int(table[v, i])
            if w in big:
                count += 1
    return count


def delta_AB(wc: WeightedComponents, A: int, B: int) -> int:
    """Delta for retained component indices A != B."""
    if A == B:
        raise InputError("A and B must differ")
    for c in (A, B):
        if not 0 <= c < wc.n:
            raise InputError(f"{c} is not a retained component")
    return edge_count(wc.graph, wc.vertices(A), wc.vertices(B))


# ----------------------------------------------------------------------------
# coupled pair


@dataclass
class CompGraph:
    """A simple graph on weighted nodes (component masses in host vertices)."""

    mass: np.ndarray
    ei: np.ndarray
    ej: np.ndarray
    _labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.mass.size

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            self._labels = labels_from_edges(self.n, self.ei.astype(np.int64), self.ej.astype(np.int64))
        return self._labels

    def csr(self) -> csr_matrix:
        data = np.ones(2 * self.ei.size, dtype=np.int8)
        r = np.concatenate((self.ei, self.ej))
        c = np.concatenate((self.ej, self.ei))
        return csr_matrix((data, (r, c)), shape=(self.n, self.n))

    def component_masses(self) -> np.ndarray:
        cm = np.bincount(self.labels, weights=self.mass.astype(float), minlength=self.n)
        return np.sort(cm[cm > 0])[::-1]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a, b in zip(self.ei.tolist(), self.ej.tolist())}


@dataclass
class ComponentGraphPair:
    wc: WeightedComponents
    q: float
    seed: int
    mode: str
    pa: np.ndarray  # adjacent pairs (Delta > 0)
    pb: np.ndarray
    delta: np.ndarray
    p_ab: np.ndarray
    q_ab: np.ndarray
    u_ab: np.ndarray
    g_x: CompGraph
    g_s: CompGraph

    @property
    def n(self) -> int:
        return self.wc.n


def pair_probabilities(q: float, sizes_a, sizes_b, delta, m: int, V: int) -> tuple[np.ndarray, np.ndarray]:
    """(p_AB, q_AB) for the given pairs."""
    V3 = V ** (1.0 / 3.0)
    wa = np.asarray(sizes_a, dtype=float) / V ** (2.0 / 3.0)
    wb = np.asarray(sizes_b, dtype=float) / V ** (2.0 / 3.0)
    p = -np.expm1(-q * np.asarray(delta, dtype=float) / (m * V3))
    qq = -np.expm1(-q * wa * wb)
    return p, qq


def pair_uniforms(key, ids_a: np.ndarray, ids_b: np.ndarray, V: int) -> np.ndarray:
    lo = np.minimum(ids_a, ids_b).astype(np.uint64)
    hi = np.maximum(ids_a, ids_b).astype(np.uint64)
    return uniforms(key, lo * np.uint64(V) + hi)


@njit(cache=True)
def _all_pairs_x(w, ids, V, q, key):
    """G_x edges over all pairs with the hashed pair uniforms."""
    n = w.size
    ei = np.empty(16, dtype=np.int64)
    ej = np.empty(16, dtype=np.int64)
    cnt = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = ids[i]
            b = ids[j]
            if a > b:
                a, b = b, a
            u = uniform_at(key, a * V + b)
            if u < -np.expm1(-q * w[i] * w[j]):
                if cnt == ei.size:
                    ei = np.concatenate((ei, np.empty(cnt, dtype=np.int64)))
                    ej = np.concatenate((ej, np.empty(cnt, dtype=np.int64)))
                ei[cnt] = i
                ej[cnt] = j
                cnt += 1
    return ei[:cnt], ej[:cnt]


def _x_nonadjacent(wc: WeightedComponents, q: float, seed: int, adj_keys: np.ndarray):
    """G_x edges among pairs with Delta = 0 (large n): bucketed skip sampling."""
    if q == 0 or wc.n < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    i, j = _bucketed_edges(wc.weights, q, seed)
    a, b = np.minimum(i, j), np.maximum(i, j)
    keep = ~np.isin(a * wc.n + b, adj_keys)
    return a[keep], b[keep]


def build_pair(wc: WeightedComponents, window: WindowParams, seed: int, mode: str = "shared",
               layer_seed: int | None = None) -> ComponentGraphPair:
    """Realize G_x and G_s on the retained components.

    ``mode="shared"``: both graphs read U_AB (strict inequalities, so q = 0
    gives empty graphs). ``mode="sprinkle"``: G_s has an edge when some host
    edge between A and B has its uniform in (p_s, p'_c]; uniforms are the
    sample's own (coupled with H_{p'_c}) or, with ``layer_seed``, fresh draws
    from their conditional law Uniform(p_s, 1].
    """
    g = wc.graph
    V, m = wc.V, g.m
    q = float(window.q_lambda)
    n = wc.n
    sizes = wc.sizes
    ids = wc.ids
    key = derive_key(seed, STREAM_PAIRS)
    pa, pb, delta = adjacent_pairs(wc)
    p_ab, q_ab = pair_probabilities(q, sizes[pa], sizes[pb], delta, m, V)
    u_ab = pair_uniforms(key, ids[pa], ids[pb], V)
    adj_keys = pa * n + pb
    # G_x
    if n <= QUADRATIC_MAX_N:
        xi, xj = _all_pairs_x(wc.weights, ids.astype(np.int64), V, q, key) if q > 0 else (
            np.zeros(0, np.int64), np.zeros(0, np.int64))
    else:
        on = u_ab < q_ab
        ni, nj = _x_nonadjacent(wc, q, seed, adj_keys)
        xi, xj = np.concatenate((pa[on], ni)), np.concatenate((pb[on], nj))
    # G_s
    if mode == "shared":
        on = u_ab < p_ab
        si, sj = pa[on], pb[on]
    elif mode == "sprinkle":
        si, sj = _sprinkled_edges(wc, window, layer_seed, wc.comp_of, n)
    else:
        raise InputError(f"unknown mode {mode!r}")
    mass = sizes.astype(np.int64)
    return ComponentGraphPair(wc, q, int(seed), mode, pa, pb, delta, p_ab, q_ab, u_ab,
                              CompGraph(mass, xi, xj), CompGraph(mass, si, sj))


def _sprinkled_edges(wc: WeightedComponents, window: WindowParams, layer_seed, comp, n):
    g = wc.graph
    p_s, p_c = wc.p_s, window.p_c_prime
    if layer_seed is None:
        a, b, u = cross_edges(g, comp, wc.sample.key)
    else:
        a, b, _ = cross_edges(g, comp)
        u = p_s + (1.0 - p_s) * generator(layer_seed, STREAM_SPRINKLE).random(a.size)
    hit = u <= p_c
    keys = np.unique(a[hit] * n + b[hit])
    return keys // n, keys % n


def full_component_graph(wc: WeightedComponents, window: WindowParams,
                         layer_seed: int | None = None) -> CompGraph:
    """Sprinkled graph over ALL p_s-components (no size threshold)."""
    n = wc.n_all
    si, sj = _sprinkled_edges(wc, window, layer_seed, wc.comp_all, n)
    return CompGraph(np.diff(wc.starts).astype(np.int64), si, sj)


def _partition_sq(labels: np.ndarray, mass: np.ndarray) -> float:
    s = np.bincount(labels, weights=mass.astype(float))
    return float(np.sum(s * s))


def discrepancy_mass(pair: ComponentGraphPair) -> float:
    """sum over ordered (A, B) of |A||B| 1(connected in exactly one graph), / V^{4/3}.

    Uses sum 1(x) + 1(s) - 2 1(x and s) over pairs: three partition sums.
    """
    mass = pair.g_x.mass
    lx, ls = pair.g_x.labels, pair.g_s.labels
    if mass.size == 0:
        return 0.0
    _, meet = np.unique(lx.astype(np.int64) * pair.n + ls, return_inverse=True)
    total = _partition_sq(lx, mass) + _partition_sq(ls, mass) - 2.0 * _partition_sq(meet.ravel(), mass)
    return max(total, 0.0) / pair.wc.V ** (4.0 / 3.0)


@njit(cache=True)
def _sum_q_sq(w, q):
    s = 0.0
    for i in range(w.size):
        for j in range(i + 1, w.size):
            x = -np.expm1(-q * w[i] * w[j])
            s += x * x
    return s


def coupling_l2(pair: ComponentGraphPair) -> float:
    """sum over ordered pairs A != B of (p_AB - q_AB)^2 (Delta = 0 pairs contribute q_AB^2)."""
    all_q = _sum_q_sq(pair.wc.weights, pair.q)
    adj = float(np.sum((pair.p_ab - pair.q_ab) ** 2) - np.sum(pair.q_ab**2))
    return 2.0 * (all_q + adj)


# ----------------------------------------------------------------------------
# connection matrices


@dataclass
class ConnectionMatrix:
    name: str
    M: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.M**2)))


def _same(labels: np.ndarray) -> np.ndarray:
    s = labels[:, None] == labels[None, :]
    np.fill_diagonal(s, False)
    return s


def connection_matrices(wc: WeightedComponents, window: WindowParams, n_mc: int, seed: int = 0):
    """(T_x, T_s, Xi, T_{s != x}) under the law conditioned on H_{p_s}."""
    if wc.n > MATRIX_CAP:
        raise InputError(f"{wc.n} components exceed the cap {MATRIX_CAP}; use wc.restrict(k)")
    if n_mc < 1:
        raise InputError("n_mc must be >= 1")
    n = wc.n
    tx = np.zeros((n, n))
    ts = np.zeros((n, n))
    tn = np.zeros((n, n))
    pair = None
    for r in range(n_mc):
        pair = build_pair(wc, window, seed + r)
        sx, ss = _same(pair.g_x.labels), _same(pair.g_s.labels)
        tx += sx
        ts += ss
        tn += sx != ss
    xi = np.zeros((n, n))
    if n:
        w = wc.weights
        xi = -np.expm1(-pair.q * np.outer(w, w))
        np.fill_diagonal(xi, 0.0)
        d = np.abs(pair.q_ab - pair.p_ab)
        xi[pair.pa, pair.pb] = d
        xi[pair.pb, pair.pa] = d
    return (ConnectionMatrix("T_x", tx / n_mc), ConnectionMatrix("T_s", ts / n_mc),
            ConnectionMatrix("Xi", xi), ConnectionMatrix("T_s!=x", tn / n_mc))


# ----------------------------------------------------------------------------
# bad pairs, metrics, girth


@njit(cache=True)
def _induced_s2(V, m, table, hyper, key, p, inside):
    parent = np.arange(V)
    size = np.ones(V, dtype=np.int64)
    for v in range(V):
        if not inside[v]:
            continue
        base = v * m
        for i in range(m):
            w = table[v, i] if not hyper else v ^ (1 << i)
            if w > v and inside[w] and uniform_at(key, base + i) <= p:
                a = v
                while parent[a] != a:
                    a = parent[a]
                b = w
                while parent[b] != b:
                    b = parent[b]
                if a != b:
                    if size[a] < size[b]:
                        a, b = b, a
                    parent[b] = a
                    size[a] += size[b]
    s = 0.0
    for v in range(V):
        if inside[v] and parent[v] == v:
            s += float(size[v]) * float(size[v])
    return s


def bad_pair_count(wc: WeightedComponents, p: float) -> float:
    """N(p) / V^{4/3}: ordered pairs connected in H_p but not inside V_*."""
    if p < wc.p_s:
        raise InputError("need p >= p_s")
    sample = wc.sample
    full = sample.stats(p).sum_sq
    m, table, hyper = sample._args
    inside = (wc.comp_all < wc.n).astype(np.uint8)
    induced = _induced_s2(wc.V, m, table, hyper, sample.key, p, inside)
    return (full - induced) / wc.V ** (4.0 / 3.0)


@dataclass
class MetricRows:
    d_box: np.ndarray  # d_box / V^{1/3}
    d_comp: np.ndarray  # chi(p_s) d_s / V^{1/3}; inf if disconnected, nan if outside V_*
    outside: np.ndarray  # U or V not in V_*
    same_ps_comp: np.ndarray
    us: np.ndarray  # sampled endpoints
    vs: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        ok = ~self.outside & np.isfinite(self.d_comp)
        return np.abs(self.d_box[ok] - self.d_comp[ok])


def metric_comparison(wc: WeightedComponents, window: WindowParams, r: int, n_pairs: int,
                      seed: int = 0, pair: ComponentGraphPair | None = None) -> MetricRows:
    """Vertex-level vs component-level distances for random pairs in C_r(H_{p'_c}).

    G_s is the sprinkle-mode graph coupled to the sample, so every G_s path
    corresponds to a path in H_{p'_c}.
    """
    sample = wc.sample
    p = window.p_c_prime
    comps = sample.components(p)
    if not 1 <= r <= len(comps):
        raise InputError(f"no component of rank {r} at p'_c")
    comp = comps[r - 1]
    rng = generator(seed, STREAM_SPRINKLE)
    us = comp[rng.integers(0, comp.size, n_pairs)]
    vs = comp[rng.integers(0, comp.size, n_pairs)]
    if pair is None:
        pair = build_pair(wc, window, seed, mode="sprinkle")
    V3 = wc.V ** (1.0 / 3.0)
    comp_of = wc.comp_of
    csr = pair.g_s.csr()
    d_box = np.empty(n_pairs)
    d_comp = np.empty(n_pairs)
    outside = np.zeros(n_pairs, dtype=bool)
    same = np.zeros(n_pairs, dtype=bool)
    cache_v: dict[int, np.ndarray] = {}
    cache_c: dict[int, np.ndarray] = {}
    for k in range(n_pairs):
        u, v = int(us[k]), int(vs[k])
        if u not in cache_v:
            cache_v[u] = sample.distances_from(p, u)
        d_box[k] = cache_v[u][v] / V3
        a, b = comp_of[u], comp_of[v]
        if a < 0 or b < 0:
            outside[k] = True
            d_comp[k] = np.nan
            continue
        same[k] = wc.comp_all[u] == wc.comp_all[v]
        if a not in cache_c:
            cache_c[a] = shortest_path(csr, unweighted=True, indices=int(a))
        d_comp[k] = window.chi_ps_hat * cache_c[a][b] / V3
    return MetricRows(d_box, d_comp, outside, same, us, vs)


@njit(cache=True)
def _girth_from(indptr, indices, nodes, allowed):
    n = allowed.size
    dist = -np.ones(n, dtype=np.int64)
    par = -np.ones(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best = np.iinfo(np.int64).max
    for s in nodes:
        dist[s] = 0
        queue[0] = s
        head, tail = 0, 1
        while head < tail:
            v = queue[head]
            head += 1
            if 2 * dist[v] + 1 >= best:
                break
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if not allowed[w]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    par[w] = v
                    queue[tail] = w
                    tail += 1
                elif par[v] != w:
                    c = dist[v] + dist[w] + 1
                    if c < best:
                        best = c
        for k in range(tail):
            dist[queue[k]] = -1
            par[queue[k]] = -1
    return best


def girth_scan(cg: CompGraph, tau: float, V: int) -> float:
    """Girth of the union of connected components of ``cg`` with mass >= tau V^{2/3} (inf if acyclic)."""
    if cg.n == 0:
        return math.inf
    lab = cg.labels
    cm = np.bincount(lab, weights=cg.mass.astype(float), minlength=cg.n)
    allowed = (cm[lab] >= tau * V ** (2.0 / 3.0)).astype(np.uint8)
    nodes = np.flatnonzero(allowed).astype(np.int64)
    if nodes.size == 0:
        return math.inf
    csr = cg.csr()
    best = _girth_from(csr.indptr.astype(np.int64), csr.indices.astype(np.int64), nodes, allowed)
    return math.inf if best == np.iinfo(np.int64).max else float(best)
