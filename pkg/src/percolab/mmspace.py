"""Finite metric measure spaces and the distances between them.

Prokhorov and GHP are computed exactly on finite spaces:

* d_P(mu, nu) = min over distance values r of max(r, G(r)), where G(r) is the
  largest excess mu(A) - nu(A^r) (or with mu, nu swapped). G is a step function
  of r, so the infimum is attained at one of the finitely many distances. The
  excess is found by enumerating subsets of the support, or as
  mu(X) - maxflow in the bipartite network source -> x -> y -> sink.
* d_GHP over the metrics on X u Y glued along a relation R with gluing length
  dis(R)/2: only maximal relations matter (more pairs shorten every distance),
  and they are the maximal cliques of the pair-compatibility graph.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import InputError
from .rng import STREAM_MISC, generator

SUBSET_MAX = 20
GHP_MAX_POINTS = 10
EXPLICIT_MAX = 5000


class FiniteMMSpace:
    """Points 0..k-1 with a distance matrix (or an implicit graph metric) and masses."""

    def __init__(self, d, mass, validate: bool = True, tol: float = 1e-9):
        self.mass = np.asarray(mass, dtype=np.float64).ravel()
        if np.any(self.mass < 0) or not np.all(np.isfinite(self.mass)):
            raise InputError("masses must be finite and nonnegative")
        self._implicit = None
        if isinstance(d, ImplicitGraphMetric):
            if d.k != self.mass.size:
                raise InputError("mass vector does not match the point count")
            self._implicit = d
            self.d = None
            return
        self.d = np.asarray(d, dtype=np.float64)
        k = self.mass.size
        if self.d.shape != (k, k):
            raise InputError("distance matrix must be k x k with k = len(mass)")
        if validate:
            check_metric(self.d, tol)

    @property
    def k(self) -> int:
        return self.mass.size

    @property
    def implicit(self) -> bool:
        return self._implicit is not None

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def diameter(self) -> float:
        if self.implicit:
            return self._implicit.diameter()
        return float(self.d.max()) if self.k else 0.0

    def same_as(self, other: FiniteMMSpace) -> bool:
        if self.implicit or other.implicit:
            return self is other
        return (self.k == other.k and np.array_equal(self.d, other.d)
                and np.array_equal(self.mass, other.mass))


def check_metric(d: np.ndarray, tol: float = 1e-9) -> None:
    if not np.allclose(d, d.T, atol=tol, rtol=0):
        raise InputError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(d)) > tol) or np.any(d < -tol):
        raise InputError("distances must be nonnegative with a zero diagonal")
    for j in range(d.shape[0]):
        # d[a, b] <= d[a, j] + d[j, b]
        if np.any(d > d[:, j:j + 1] + d[j:j + 1, :] + tol):
            raise InputError("triangle inequality fails")


class ImplicitGraphMetric:
    """Shortest-path metric of a percolation component, evaluated by BFS on demand."""

    def __init__(self, sample, p: float, vertices: np.ndarray, scale: float):
        self.sample = sample
        self.p = float(p)
        self.vertices = np.asarray(vertices, dtype=np.int64)
        self.scale = float(scale)

    @property
    def k(self) -> int:
        return self.vertices.size

    def rows(self, idx: np.ndarray) -> np.ndarray:
        """Distances from the points ``idx`` to all points, scaled."""
        out = np.empty((idx.size, self.k))
        for r, i in enumerate(idx):
            dist = self.sample.distances_from(self.p, int(self.vertices[i]))
            out[r] = dist[self.vertices] * self.scale
        return out

    def diameter(self) -> float:
        raise InputError("diameter of an implicit space is not computed; sample distances instead")


@dataclass
class MMSequence:
    spaces: list[FiniteMMSpace]

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.total_mass for s in self.spaces])

    @property
    def diameters(self) -> np.ndarray:
        return np.array([s.diameter for s in self.spaces])

    @property
    def l4_mass(self) -> float:
        return float(np.sum(self.masses**4) ** 0.25)

    @property
    def l4_diam(self) -> float:
        return float(np.sum(self.diameters**4) ** 0.25)


def empty_space() -> FiniteMMSpace:
    """The empty space, represented as one point of zero mass."""
    return FiniteMMSpace(np.zeros((1, 1)), [0.0])


# ----------------------------------------------------------------------------
# Hausdorff and Prokhorov in a common space


def _indices(A) -> np.ndarray:
    a = np.unique(np.asarray(A, dtype=np.int64).ravel())
    if a.size == 0:
        raise InputError("sets must be nonempty")
    return a


def hausdorff(d: np.ndarray, A, B) -> float:
    a, b = _indices(A), _indices(B)
    sub = np.asarray(d)[np.ix_(a, b)]
    return float(max(sub.min(axis=1).max(), sub.min(axis=0).max()))


def _excess_subsets(reach: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    """max over A subset of supp(mu) of mu(A) - nu(reach(A)); reach is boolean |supp| x k."""
    s = reach.shape[0]
    k = reach.shape[1]
    if s == 0:
        return 0.0
    # neighborhood bitmasks over the k points, in blocks of 62 bits
    nblk = (k + 61) // 62
    bits = np.zeros((s, nblk), dtype=np.int64)
    for j in range(k):
        bits[:, j // 62] |= reach[:, j].astype(np.int64) << (j % 62)
    n_sub = 1 << s
    mass = np.zeros(n_sub)
    nb = np.zeros((n_sub, nblk), dtype=np.int64)
    for i in range(s):
        lo, hi = 1 << i, 1 << (i + 1)
        mass[lo:hi] = mass[:lo] + mu[i]
        nb[lo:hi] = nb[:lo] | bits[i]
    nu_mass = np.zeros(n_sub)
    for j in range(k):
        if nu[j] != 0:
            nu_mass += ((nb[:, j // 62] >> (j % 62)) & 1) * nu[j]
    return float(np.max(mass - nu_mass))


def _excess_flow(reach: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    G = nx.DiGraph()
    s, k = reach.shape
    for i in range(s):
        G.add_edge("s", ("a", i), capacity=float(mu[i]))
        for j in np.flatnonzero(reach[i]):
            G.add_edge(("a", i), ("b", int(j)))
    for j in range(k):
        if nu[j] > 0:
            G.add_edge(("b", j), "t", capacity=float(nu[j]))
    if "t" not in G:
        return float(mu.sum())
    flow = nx.maximum_flow_value(G, "s", "t")
    return float(mu.sum() - flow)


def _excess(d: np.ndarray, mu: np.ndarray, nu: np.ndarray, r: float, method: str) -> float:
    sup = np.flatnonzero(mu > 0)
    reach = d[sup] <= r
    if method == "subsets":
        return _excess_subsets(reach, mu[sup], nu)
    return _excess_flow(reach, mu[sup], nu)


def prokhorov(d: np.ndarray, mu, nu, grid: float | None = None, method: str = "auto",
              cutoff: float = math.inf) -> float:
    """Exact Prokhorov distance between two measures on the same finite space.

    The value is exact; ``grid`` is accepted for interface compatibility and
    only validated. With ``cutoff`` the search stops once no value below it
    is possible (the result is then some number >= cutoff).
    """
    d = np.asarray(d, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    k = d.shape[0]
    if mu.shape != (k,) or nu.shape != (k,):
        raise InputError("measures must have one mass per point")
    if grid is not None and grid <= 0:
        raise InputError("grid must be positive")
    s = max(np.count_nonzero(mu > 0), np.count_nonzero(nu > 0))
    if method == "auto":
        method = "subsets" if s <= 15 else "flow"
    if method == "subsets" and s > SUBSET_MAX:
        raise InputError(f"subset enumeration is limited to {SUBSET_MAX} support points; use method='flow'")
    if method not in ("subsets", "flow"):
        raise InputError(f"unknown method {method!r}")
    radii = np.unique(np.concatenate(([0.0], d.ravel())))
    best = cutoff
    for r in radii:
        if r >= best:
            break
        g = max(_excess(d, mu, nu, r, method), _excess(d, nu, mu, r, method))
        best = min(best, max(r, g))
    return float(best)


# ----------------------------------------------------------------------------
# Gromov-Prokhorov via sampled distance matrices


def gp_distance_matrix(space: FiniteMMSpace, n_points: int, seed: int) -> np.ndarray:
    """Distances between n i.i.d. points drawn from mass / total mass."""
    tot = space.total_mass
    if not tot > 0:
        raise InputError("space has zero total mass")
    if n_points < 1:
        raise InputError("n_points must be >= 1")
    idx = generator(seed, STREAM_MISC).choice(space.k, size=n_points, p=space.mass / tot)
    if space.implicit:
        uniq, inv = np.unique(idx, return_inverse=True)
        rows = space._implicit.rows(uniq)
        return rows[inv.ravel()][:, idx]
    return space.d[np.ix_(idx, idx)]


# ----------------------------------------------------------------------------
# GHP by brute force


def glue(dX: np.ndarray, dY: np.ndarray, R, delta: float) -> np.ndarray:
    """Metric on X u Y gluing each (x, y) in R at distance delta."""
    nx_, ny = dX.shape[0], dY.shape[0]
    R = list(R)
    xs = np.array([x for x, _ in R])
    ys = np.array([y for _, y in R])
    # cross[x, y] = min over (x', y') in R of dX[x, x'] + delta + dY[y', y]
    cross = (dX[:, xs][:, :, None] + dY[ys, :][None, :, :]).min(axis=1) + delta
    Z = np.zeros((nx_ + ny, nx_ + ny))
    Z[:nx_, :nx_] = dX
    Z[nx_:, nx_:] = dY
    Z[:nx_, nx_:] = cross
    Z[nx_:, :nx_] = cross.T
    return Z


def _ghp_for_metric(Z: np.ndarray, mX: np.ndarray, mY: np.ndarray, cutoff: float = math.inf) -> float:
    nx_ = mX.size
    dh = hausdorff(Z, range(nx_), range(nx_, Z.shape[0]))
    if dh >= cutoff:
        return dh
    mu = np.concatenate((mX, np.zeros(mY.size)))
    nu = np.concatenate((np.zeros(mX.size), mY))
    return max(dh, prokhorov(Z, mu, nu, cutoff=cutoff))


def ghp_bruteforce(X: FiniteMMSpace, Y: FiniteMMSpace) -> float:
    """Exact GHP distance over relation-glued metrics, for |X| + |Y| <= 10."""
    if X.implicit or Y.implicit:
        raise InputError("implicit spaces support only gp_distance_matrix")
    if X.k + Y.k > GHP_MAX_POINTS:
        raise InputError(f"|X| + |Y| = {X.k + Y.k} exceeds {GHP_MAX_POINTS}; use gp_distance_matrix")
    if X.same_as(Y):
        return 0.0
    dX, dY = X.d, Y.d
    pairs = list(itertools.product(range(X.k), range(Y.k)))
    gap = {}
    for (a, (x, y)), (b, (x2, y2)) in itertools.combinations(enumerate(pairs), 2):
        gap[a, b] = abs(dX[x, x2] - dY[y, y2]) / 2.0
    levels = np.unique(np.concatenate(([0.0], np.fromiter(gap.values(), float, len(gap)))))
    best = math.inf
    seen = set()
    for lev in levels:
        if lev >= best:
            break
        G = nx.Graph()
        G.add_nodes_from(range(len(pairs)))
        G.add_edges_from(e for e, v in gap.items() if v <= lev)
        for clique in nx.find_cliques(G):
            key = frozenset(clique)
            if key in seen:
                continue
            seen.add(key)
            delta = max((gap[min(a, b), max(a, b)] for a, b in itertools.combinations(clique, 2)),
                        default=0.0)
            if delta >= best:
                continue
            Z = glue(dX, dY, [pairs[c] for c in clique], delta)
            best = min(best, _ghp_for_metric(Z, X.mass, Y.mass, best))
    return float(best)


def ghp_empty_bound(X: FiniteMMSpace) -> float:
    """Upper bound diam(X) + mass(X) on the distance to the empty space."""
    return X.diameter + X.total_mass


def l4_sequence_distance(sA: MMSequence, sB: MMSequence, mode: str = "auto") -> tuple[float, bool]:
    """(sum_i d_GHP(A_i, B_i)^4)^{1/4} and whether every term is exact.

    ``mode="exact"`` requires every term to be brute-forceable; ``"proxy"``
    bounds each term by the route through the empty space; ``"auto"`` uses the
    exact value when the sizes allow it.
    """
    if mode not in ("auto", "exact", "proxy"):
        raise InputError(f"unknown mode {mode!r}")
    n = max(len(sA.spaces), len(sB.spaces))
    A = list(sA.spaces) + [empty_space()] * (n - len(sA.spaces))
    B = list(sB.spaces) + [empty_space()] * (n - len(sB.spaces))
    total = 0.0
    exact = True
    for x, y in zip(A, B):
        if x.same_as(y):
            term = 0.0
        elif mode != "proxy" and x.k + y.k <= GHP_MAX_POINTS and not (x.implicit or y.implicit):
            term = ghp_bruteforce(x, y)
        elif mode == "exact":
            raise InputError("a term is too large for the exact brute force")
        else:
            term = ghp_empty_bound(x) + ghp_empty_bound(y)
            exact = False
        total += term**4
    return float(total**0.25), exact


# ----------------------------------------------------------------------------
# construction from percolation components and component graphs


def from_component(sample, p: float, vertices, distance_scale: float, mass_scale: float,
                   implicit: bool | None = None) -> FiniteMMSpace:
    """Component of H_p with its graph metric times ``distance_scale``, each vertex of mass ``mass_scale``.

    Above 5000 vertices (or with ``implicit=True``) the metric stays implicit
    and only sampled distance matrices are available.
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    if vertices.size == 0:
        raise InputError("empty component")
    mass = np.full(vertices.size, float(mass_scale))
    if implicit is None:
        implicit = vertices.size > EXPLICIT_MAX
    if implicit:
        return FiniteMMSpace(ImplicitGraphMetric(sample, p, vertices, distance_scale), mass)
    metric = ImplicitGraphMetric(sample, p, vertices, distance_scale)
    d = metric.rows(np.arange(vertices.size))
    if np.any(d < 0):
        raise InputError("vertices do not form one component of H_p")
    return FiniteMMSpace(d, mass, validate=False)


def from_comp_graph(cg, nodes, distance_scale: float, mass_scale: float) -> FiniteMMSpace:
    """Nodes of a component graph with its hop metric and masses |A| * mass_scale."""
    from scipy.sparse.csgraph import shortest_path

    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise InputError("empty component")
    d = shortest_path(cg.csr(), unweighted=True, indices=nodes)[:, nodes]
    if not np.all(np.isfinite(d)):
        raise InputError("nodes do not form one connected component")
    return FiniteMMSpace(d * distance_scale, cg.mass[nodes] * mass_scale, validate=False)


# ----------------------------------------------------------------------------
# space files: k, then k masses, then k rows of the lower triangle (diagonal included)


def read_space(path) -> FiniteMMSpace:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise InputError(f"cannot read space file {path}: {exc}") from None
    while lines and lines[-1] == "":
        lines.pop()
    try:
        k = int(lines[0])
        mass = [float(lines[1 + i]) for i in range(k)]
        d = np.zeros((k, k))
        for i in range(k):
            row = [float(x) for x in lines[1 + k + i].split()] if 1 + k + i < len(lines) else []
            if len(row) == i + 1:
                row = row[:i]
            if len(row) != i:
                raise InputError(f"row {i} of the distance triangle has {len(row)} entries")
            d[i, :i] = row
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed space file: {exc}") from None
    d = d + d.T
    return FiniteMMSpace(d, mass)


def write_space(path, space: FiniteMMSpace) -> None:
    if space.implicit:
        raise InputError("cannot write an implicit space")
    with open(path, "w") as fh:
        fh.write(f"{space.k}\n")
        for x in space.mass:
            fh.write(f"{float(x)!r}\n")
        for i in range(space.k):
            fh.write(" ".join(repr(float(v)) for v in space.d[i, :i + 1]) + "\n")
