import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import nb_path_counts
from percolab.errors import InputError, UnsupportedGraphError
from percolab.substrate import (alpha_m, from_neighbor_table, hypercube, hypercube_weight_profile,
                                mixing_profile, mixing_time, nbrw_distribution,
                                nbrw_distribution_full, nbrw_distribution_reduced, neighbors,
                                triangle_diagram_rw)


def test_neighbors_examples():
    assert neighbors(hypercube(3), 0b000) == [0b001, 0b010, 0b100]
    assert neighbors(hypercube(2), 0b11) == [0b10, 0b01]
    assert neighbors(hypercube(1), 0) == [1]


def test_neighbors_out_of_range():
    with pytest.raises(InputError):
        neighbors(hypercube(3), 8)
    with pytest.raises(InputError):
        neighbors(hypercube(3), -1)


def test_hypercube_table_invariants():
    g = hypercube(5)
    tab = g.neighbor_table()
    for v in range(g.V):
        row = tab[v]
        assert len(set(row.tolist())) == g.m and v not in row
        assert all(bin(v ^ int(z)).count("1") == 1 for z in row)
        assert all(v in tab[z] for z in row)


def test_neighbor_table_validation():
    with pytest.raises(InputError):
        from_neighbor_table([[0, 1], [0, 2], [0, 1]])  # self-loop at 0
    with pytest.raises(InputError):
        from_neighbor_table([[1], [2], [0]])  # 0->1 but 1 does not list 0


def test_nbrw_examples():
    d = nbrw_distribution(hypercube(2), 0, 2)
    assert d[0b11] == 1.0 and d.sum() == 1.0
    d = nbrw_distribution(hypercube(3), 0, 1)
    np.testing.assert_allclose(d[[1, 2, 4]], 1 / 3, atol=1e-15)
    assert d.sum() == pytest.approx(1.0, abs=1e-15)


def test_nbrw_m4_t3_matches_path_enumeration():
    m, t = 4, 3
    counts = nb_path_counts(m, 0, t)
    total = m * (m - 1) ** (t - 1)
    expect = np.zeros(1 << m)
    for z, c in counts.items():
        expect[z] = c / total
    np.testing.assert_allclose(nbrw_distribution(hypercube(m), 0, t), expect, atol=1e-15)
    np.testing.assert_allclose(nbrw_distribution_full(hypercube(m), 0, t), expect, atol=1e-15)


@pytest.mark.parametrize("m", [2, 3, 4])
@pytest.mark.parametrize("t", [1, 2, 3, 4])
def test_path_count_identity(m, t):
    counts = nb_path_counts(m, 0, t)
    d = nbrw_distribution_full(hypercube(m), 0, t)
    scaled = d * m * (m - 1) ** (t - 1)
    for z in range(1 << m):
        assert scaled[z] == pytest.approx(counts.get(z, 0), abs=1e-9)
        assert abs(scaled[z] - round(scaled[z])) < 1e-9


def test_degree_one_walk_unsupported():
    with pytest.raises(UnsupportedGraphError):
        nbrw_distribution(hypercube(1), 0, 2)
    with pytest.raises(UnsupportedGraphError):
        mixing_time(hypercube(1), 0.5, 5)
    # one step on a single edge is still defined
    assert nbrw_distribution_full(hypercube(1), 0, 1).tolist() == [0.0, 1.0]


@pytest.mark.parametrize("m", [2, 5, 8, 10])
def test_reduced_equals_full(m):
    g = hypercube(m)
    for u in (0, (1 << m) - 1, 5 % (1 << m)):
        for t in range(0, 21):
            a = nbrw_distribution_reduced(m, u, t)
            b = nbrw_distribution_full(g, u, t)
            assert np.max(np.abs(a - b)) <= 1e-12


def test_transitivity_multisets():
    rng = np.random.default_rng(0)
    for m in (3, 4, 6):
        g = hypercube(m)
        base = np.sort(nbrw_distribution_full(g, 0, 5))
        for x in rng.integers(0, g.V, 3):
            np.testing.assert_allclose(np.sort(nbrw_distribution_full(g, int(x), 5)), base, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 25), st.data())
def test_rows_are_stochastic(m, t, data):
    u = data.draw(st.integers(0, (1 << m) - 1))
    d = nbrw_distribution(hypercube(m), u, t)
    assert abs(d.sum() - 1.0) <= 1e-12
    assert d.min() >= 0 and d.max() <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 40))
def test_weight_profile_stochastic(m, t):
    f = hypercube_weight_profile(m, t)
    np.testing.assert_allclose(f.sum(axis=1), 1.0, atol=1e-12)
    # bipartite parity: only weights of the parity of t are reachable
    k = np.arange(m + 1)
    assert np.all(f[t][(k % 2) != (t % 2)] == 0)


@pytest.mark.parametrize("m", [8, 10, 12])
def test_mixing_time_bound(m):
    T = mixing_time(hypercube(m), alpha_m(m), 400)
    assert T <= 10 * m * math.log(m)


@pytest.mark.parametrize("m", [6, 10, 12])
def test_mixing_time_reduced_equals_full(m):
    g = hypercube(m)
    xi = alpha_m(m)
    assert mixing_time(g, xi, 200, method="reduced") == mixing_time(g, xi, 200, method="full")


def test_mixing_time_sentinel_and_profile():
    g = hypercube(8)
    assert mixing_time(g, 1e-9, 3) == 4
    rows = mixing_profile(g, 0.5, 30)
    T = mixing_time(g, 0.5, 30)
    assert [r[0] for r in rows] == list(range(31))
    assert rows[T][2] and not any(r[2] for r in rows[:T])


def test_mixing_time_explicit_graph_matches_hypercube():
    g = hypercube(6)
    h = from_neighbor_table(g.neighbor_table())
    assert not h.is_hypercube
    assert mixing_time(h, 0.3, 100) == mixing_time(g, 0.3, 100)


def test_triangle_closed_walk_vanishes():
    assert triangle_diagram_rw(hypercube(3), 0, 0, 1) == pytest.approx(0.0, abs=1e-15)


def _brute_triangle(m, x, y, m0):
    g = hypercube(m)
    V = g.V
    P = [np.array([nbrw_distribution_full(g, u, t) for u in range(V)]) for t in range(m0 + 1)]
    total = 0.0
    for t1 in range(m0 + 1):
        for t2 in range(m0 + 1):
            for t3 in range(m0 + 1):
                if t1 + t2 + t3 < 3:
                    continue
                for u in range(V):
                    for v in range(V):
                        total += P[t1][x, u] * P[t2][u, v] * P[t3][v, y]
    return total


def test_triangle_matches_brute_force():
    assert triangle_diagram_rw(hypercube(4), 0, 0b0011, 3) == pytest.approx(
        _brute_triangle(4, 0, 0b0011, 3), abs=1e-12)


def test_triangle_explicit_graph_path():
    g = hypercube(4)
    h = from_neighbor_table(g.neighbor_table())
    assert triangle_diagram_rw(h, 1, 6, 3) == pytest.approx(triangle_diagram_rw(g, 1, 6, 3), abs=1e-12)


def test_triangle_diagnostic_m10_is_small():
    m = 10
    m0 = round(m * math.log(m))
    val = triangle_diagram_rw(hypercube(m), 0, 0, m0)
    # once mixed every closed-walk term is about 1/V; what remains is the short-walk excess
    n_terms = (m0 + 1) ** 3 - 10
    excess = val - n_terms / 2**m
    assert 0 < excess < 1
