"""Numba kernels shared by the percolation and component-graph code.

Graphs are passed as ``(m, table, hyper)``: for the hypercube ``hyper`` is
True and ``table`` is a dummy; otherwise ``table`` is the ``V x m`` neighbor
array. The undirected edge {v, w} is owned by its smaller endpoint and its
uniform is drawn at counter ``v*m + slot``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .rng import uniform_at


@njit(cache=True, inline="always")
def nbr(v, i, table, hyper):
    if hyper:
        return v ^ (1 << i)
    return table[v, i]


@njit(cache=True)
def find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def union(parent, size, a, b):
    ra = find(parent, a)
    rb = find(parent, b)
    if ra == rb:
        return ra, 0
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra, rb


@njit(cache=True)
def percolate_labels(V, m, table, hyper, key, p):
    """Streaming union-find over all owned edges with uniform <= p.

    Returns the fully compressed root label of every vertex.
    """
    parent = np.arange(V)
    size = np.ones(V, dtype=np.int64)
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v and uniform_at(key, base + i) <= p:
                union(parent, size, v, w)
    for v in range(V):
        parent[v] = find(parent, v)
    return parent


@njit(cache=True)
def open_mask(V, m, table, hyper, key, p):
    """``mask[v, i]`` is 1 iff the edge from v through slot i is p-open."""
    mask = np.zeros((V, m), dtype=np.uint8)
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v and uniform_at(key, base + i) <= p:
                mask[v, i] = 1
                # locate the reverse slot
                if hyper:
                    mask[w, i] = 1
                else:
                    for j in range(m):
                        if table[w, j] == v:
                            mask[w, j] = 1
                            break
    return mask


@njit(cache=True)
def open_mask_window(V, m, table, hyper, key, lo, hi):
    """Mask of edges whose uniform lies in (lo, hi]."""
    mask = np.zeros((V, m), dtype=np.uint8)
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v:
                u = uniform_at(key, base + i)
                if u > lo and u <= hi:
                    mask[v, i] = 1
                    if hyper:
                        mask[w, i] = 1
                    else:
                        for j in range(m):
                            if table[w, j] == v:
                                mask[w, j] = 1
                                break
    return mask


@njit(cache=True)
def edges_below(V, m, table, hyper, key, p_hi):
    """Owned edges with uniform <= p_hi as (u, v, U) arrays (two passes)."""
    count = 0
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v and uniform_at(key, base + i) <= p_hi:
                count += 1
    us = np.empty(count, dtype=np.int64)
    ws = np.empty(count, dtype=np.int64)
    uu = np.empty(count, dtype=np.float64)
    k = 0
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v:
                x = uniform_at(key, base + i)
                if x <= p_hi:
                    us[k] = v
                    ws[k] = w
                    uu[k] = x
                    k += 1
    return us, ws, uu


@njit(cache=True)
def s2_curve(V, us, ws):
    """Sum of squared component sizes after each edge insertion (in the given order)."""
    parent = np.arange(V)
    size = np.ones(V, dtype=np.int64)
    s2 = np.empty(us.size, dtype=np.float64)
    cur = float(V)
    for k in range(us.size):
        ra = find(parent, us[k])
        rb = find(parent, ws[k])
        if ra != rb:
            a = float(size[ra])
            b = float(size[rb])
            cur += 2.0 * a * b
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
        s2[k] = cur
    return s2


@njit(cache=True)
def bfs(m, table, hyper, mask, src, maxdepth, dist, queue):
    """BFS in the masked graph from ``src`` up to depth ``maxdepth`` (-1 = unbounded).

    ``dist`` must be -1 everywhere on entry; visited entries are left set and
    listed in ``queue[:n]`` (returned n) so the caller can reset them.
    """
    dist[src] = 0
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        d = dist[v]
        if maxdepth >= 0 and d >= maxdepth:
            continue
        for i in range(m):
            if mask[v, i]:
                w = nbr(v, i, table, hyper)
                if dist[w] < 0:
                    dist[w] = d + 1
                    queue[tail] = w
                    tail += 1
    return tail


@njit(cache=True)
def reset(dist, queue, n):
    for k in range(n):
        dist[queue[k]] = -1


@njit(cache=True)
def ball_scan(V, m, table, hyper, mask, R, M, verts):
    """Count vertices v in ``verts`` with |B(v,R)| <= M and a vertex at distance exactly R."""
    dist = -np.ones(V, dtype=np.int64)
    queue = np.empty(V, dtype=np.int64)
    count = 0
    for src in verts:
        dist[src] = 0
        queue[0] = src
        head = 0
        tail = 1
        reached = R == 0
        too_big = False
        while head < tail:
            v = queue[head]
            head += 1
            d = dist[v]
            if d >= R:
                continue
            for i in range(m):
                if mask[v, i]:
                    w = nbr(v, i, table, hyper)
                    if dist[w] < 0:
                        dist[w] = d + 1
                        queue[tail] = w
                        tail += 1
                        if d + 1 == R:
                            reached = True
                        if tail > M:
                            too_big = True
                            break
            if too_big:
                break
        if reached and not too_big:
            count += 1
        for k in range(tail):
            dist[queue[k]] = -1
    return count


@njit(cache=True)
def component_diameters(V, m, table, hyper, mask, order, starts, exact_floor, n_peripheral):
    """Diameter per component.

    ``order`` lists vertices grouped by component, component c occupying
    ``order[starts[c]:starts[c+1]]``. Components of size <= exact_floor get an
    exact all-sources BFS diameter; larger ones get the max eccentricity over
    a double sweep plus BFS from up to ``n_peripheral`` far vertices (a lower
    bound). Returns (diam, exact_flag).
    """
    nc = starts.size - 1
    diam = np.zeros(nc, dtype=np.int64)
    exact = np.zeros(nc, dtype=np.uint8)
    dist = -np.ones(V, dtype=np.int64)
    queue = np.empty(V, dtype=np.int64)
    for c in range(nc):
        lo = starts[c]
        hi = starts[c + 1]
        sz = hi - lo
        if sz == 1:
            exact[c] = 1
            continue
        if sz <= exact_floor:
            best = 0
            for k in range(lo, hi):
                n = bfs(m, table, hyper, mask, order[k], -1, dist, queue)
                ecc = dist[queue[n - 1]]
                if ecc > best:
                    best = ecc
                reset(dist, queue, n)
            diam[c] = best
            exact[c] = 1
            continue
        # double sweep
        n = bfs(m, table, hyper, mask, order[lo], -1, dist, queue)
        a = queue[n - 1]
        reset(dist, queue, n)
        n = bfs(m, table, hyper, mask, a, -1, dist, queue)
        best = dist[queue[n - 1]]
        # peripheral candidates: the last vertices reached from a
        cand = queue[max(0, n - n_peripheral):n].copy()
        reset(dist, queue, n)
        for src in cand:
            n = bfs(m, table, hyper, mask, src, -1, dist, queue)
            ecc = dist[queue[n - 1]]
            if ecc > best:
                best = ecc
            reset(dist, queue, n)
        diam[c] = best
    return diam, exact


@njit(cache=True, inline="always")
def _cell(ps, x, inv_step):
    """Least j with ps[j] >= x; guessed from the mean step, then corrected."""
    j = int((x - ps[0]) * inv_step)
    if j < 0:
        j = 0
    if j > ps.size - 1:
        j = ps.size - 1
    while j > 0 and ps[j - 1] >= x:
        j -= 1
    while ps[j] < x:
        j += 1
    return j


@njit(cache=True)
def s2_at(V, m, table, hyper, key, ps):
    """sum_i |C_i(H_p)|^2 at each p of the ascending array ``ps`` for one seed.

    Only the grid cell of each edge matters, so edges are bucketed by cell
    (counting sort) instead of being sorted by their uniforms.
    """
    nps = ps.size
    p_hi = ps[-1]
    inv_step = (nps - 1) / (p_hi - ps[0]) if p_hi > ps[0] else 0.0
    n = 0
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v and uniform_at(key, base + i) <= p_hi:
                n += 1
    us = np.empty(n, dtype=np.int64)
    ws = np.empty(n, dtype=np.int64)
    cell = np.empty(n, dtype=np.int64)
    k = 0
    for v in range(V):
        base = v * m
        for i in range(m):
            w = nbr(v, i, table, hyper)
            if w > v:
                u = uniform_at(key, base + i)
                if u <= p_hi:
                    us[k] = v
                    ws[k] = w
                    cell[k] = _cell(ps, u, inv_step)
                    k += 1
    counts = np.zeros(nps + 1, dtype=np.int64)
    for k in range(n):
        counts[cell[k] + 1] += 1
    for j in range(nps):
        counts[j + 1] += counts[j]
    order = np.empty(n, dtype=np.int64)
    fill = counts[:nps].copy()
    for k in range(n):
        c = cell[k]
        order[fill[c]] = k
        fill[c] += 1
    parent = np.arange(V)
    size = np.ones(V, dtype=np.int64)
    out = np.empty(nps, dtype=np.float64)
    cur = float(V)
    for j in range(nps):
        for t in range(counts[j], counts[j + 1]):
            e = order[t]
            ra = find(parent, us[e])
            rb = find(parent, ws[e])
            if ra != rb:
                cur += 2.0 * float(size[ra]) * float(size[rb])
                if size[ra] < size[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]
        out[j] = cur
    return out
