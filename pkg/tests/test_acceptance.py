"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with

    python3 -m pytest tests/test_acceptance.py -s

The lines are also repeated in the pytest terminal summary. The heavy
calibrations at m = 14..20 are shared with the other test files through
the fixtures in conftest.py.
"""
import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import cdist

from oracles import (canonical_partition, exhaustive_percolation, hausdorff_oracle, mult_partition_law,
                     prokhorov_oracle)
from percolab.calibration import expansion_gap, kappa_auto, window_width_check
from percolab.component_graphs import build_pair, discrepancy_mass, extract_weighted_components
from percolab.harness import (REGISTRY, ExperimentConfig, distance_matrix_test, energy_test,
                              er_gp_matrix, hypercube_gp_matrix, run_experiment)
from percolab.limit_oracle import default_horizon, er_size_vector, kappa_brownian, kappa_er, sample_excursions
from percolab.mmspace import FiniteMMSpace, MMSequence, ghp_bruteforce, hausdorff, l4_sequence_distance, prokhorov
from percolab.multiplicative import WeightVector, sample_direct, sample_exploration
from percolab.percolation import PercolationSample
from percolab.substrate import (alpha_m, hypercube, mixing_time, nbrw_distribution_full,
                                nbrw_distribution_reduced)

RESULTS: list[str] = []

# sample seeds kept away from the calibration seeds
SAMPLE_OFFSET = 50_000_000


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# ----------------------------------------------------------------------------
# 1. percolation on the 3-cube against exhaustive enumeration


def test_criterion_1_exhaustive_m3():
    c0_ex, c1_ex, tail, _ = exhaustive_percolation(3, 0.5, ks=(4,))
    g = hypercube(3)
    n = 100_000
    c0 = np.empty(n)
    c1 = np.empty(n)
    for s in range(n):
        lab = PercolationSample(g, s).labels(0.5)
        c0[s] = np.count_nonzero(lab == lab[0])
        c1[s] = np.bincount(lab).max()
    parts = []
    ok = True
    for name, vals, exact in (("E|C(0)|", c0, c0_ex), ("E|C1|", c1, c1_ex), ("P(|C(0)|>=4)", c0 >= 4, tail[4])):
        z = (vals.mean() - exact) / (vals.std(ddof=1) / math.sqrt(n))
        ok &= abs(z) < 3
        parts.append(f"{name} z={z:+.2f}")
    verdict(1, ok, ", ".join(parts))


# ----------------------------------------------------------------------------
# 2. reduced walk equals the full walk; mixing bound


def test_criterion_2_nbrw_and_mixing():
    worst = 0.0
    for m in range(2, 11):
        g = hypercube(m)
        for u in {0, (1 << m) - 1, 5 % (1 << m), (1 << m) // 3}:
            for t in range(21):
                a = nbrw_distribution_reduced(m, u, t)
                b = nbrw_distribution_full(g, u, t)
                worst = max(worst, float(np.max(np.abs(a - b))))
    times = {m: mixing_time(hypercube(m), alpha_m(m), 400) for m in (8, 10, 12)}
    ok = worst <= 1e-12 and all(T <= 10 * m * math.log(m) for m, T in times.items())
    verdict(2, ok, f"max |reduced - full| = {worst:.1e}, T_mix = {times}")


# ----------------------------------------------------------------------------
# 3. multiplicative graph, n = 3


def test_criterion_3_multiplicative_n3():
    w, q = [1.0, 1.0, 1.0], 1.0
    wv = WeightVector(w, q)
    law = mult_partition_law(w, q)
    keys = sorted(law)
    n = 100_000
    direct = [canonical_partition(sample_direct(wv, s).labels) for s in range(n)]
    pooled = np.empty(n)
    explo = []
    for s in range(n):
        tr = sample_exploration(wv, s + n)
        explo.append(canonical_partition(tr.labels))
        c0 = tr.labels[0]
        pooled[s] = tr.local_times[c0] * q * tr.comp_weights[c0]
    counts = np.array([[sum(1 for x in xs if x == k) for k in keys] for xs in (direct, explo)], float)
    exp = np.array([law[k] for k in keys]) * n
    p_direct = stats.chisquare(counts[0], exp).pvalue
    p_explo = stats.chisquare(counts[1], exp).pvalue
    p_agree = stats.chi2_contingency(counts).pvalue
    p_local = stats.kstest(pooled, "expon").pvalue
    ok = min(p_direct, p_explo, p_agree, p_local) > 0.01
    verdict(3, ok, f"chi2 p direct={p_direct:.3f} exploration={p_explo:.3f} agreement={p_agree:.3f}, "
                   f"local time KS p={p_local:.3f}")


# ----------------------------------------------------------------------------
# 4. limit oracle


def test_criterion_4_limit_oracle():
    h = 1e-4
    zero = {lam: sample_excursions(lam, h=h, noise=False).lengths for lam in (0.5, 1.0, 2.0)}
    ok_zero = all(v.size == 1 and abs(v[0] - 2 * lam) <= h + 1e-12 for lam, v in zero.items())
    n = 400
    kb, sb, _ = kappa_brownian(0.0, n, h=h, base_seed=1_000_000)
    ke, se = kappa_er(0.0, 100_000, n, base_seed=1_000_000)
    z = (kb - ke) / math.hypot(sb, se)
    ks = {lam: kappa_brownian(lam, n, h=h, base_seed=2_000_000 + 10_000 * i)[:2]
          for i, lam in enumerate((-1.0, 0.0, 1.0))}
    ci = {lam: (k - 1.96 * s, k + 1.96 * s) for lam, (k, s) in ks.items()}
    ok_mono = ci[-1.0][1] < ci[0.0][0] and ci[0.0][1] < ci[1.0][0]
    # doubling the horizon on the same noise
    kT, sT, _ = kappa_brownian(0.0, n, h=h, base_seed=1_000_000)
    k2T, _, _ = kappa_brownian(0.0, n, T=2 * default_horizon(0.0), h=h, base_seed=1_000_000)
    ok_T = abs(k2T - kT) <= sT
    ok = ok_zero and abs(z) < 3 and ok_mono and ok_T
    verdict(4, ok, f"zero-noise {'ok' if ok_zero else 'bad'}, kappa_bm(0)={kb:.3f}+-{sb:.3f} vs "
                   f"kappa_er(0)={ke:.3f}+-{se:.3f} (z={z:+.2f}), "
                   f"kappa(-1,0,1)={[round(ks[x][0], 3) for x in (-1.0, 0.0, 1.0)]}, "
                   f"T-doubling shift {k2T - kT:+.4f} (se {sT:.4f})")


# ----------------------------------------------------------------------------
# 5. and 6. m = 18 against G(2^18, p) at lambda = 0

N_SIDE = 300


def test_criterion_5_sizes_vs_er(pc_at):
    g = hypercube(18)
    p = pc_at(18).p_c_hat
    X = np.array([PercolationSample(g, SAMPLE_OFFSET + s).stats(p).top(5) for s in range(N_SIDE)])
    Y = np.array([er_size_vector(g.V, 0.0, SAMPLE_OFFSET + s, 5) for s in range(N_SIDE)])
    rep = energy_test(X, Y, n_perm=2000, seed=5)
    verdict(5, not rep.reject, f"energy statistic {rep.statistic:.4f}, p={rep.p_value:.4f} "
                               f"(p_c_hat={p:.6f}, mean top-1 {X[:, 0].mean():.3f} vs {Y[:, 0].mean():.3f})")


def test_criterion_6_gp_vs_er(pc_at):
    g = hypercube(18)
    p = pc_at(18).p_c_hat
    A = [hypercube_gp_matrix(g, p, SAMPLE_OFFSET + s, 4) for s in range(N_SIDE)]
    B = [er_gp_matrix(g.V, 0.0, SAMPLE_OFFSET + s, 4) for s in range(N_SIDE)]
    rep = distance_matrix_test(A, B, 4, n_perm=2000, seed=6)
    verdict(6, not rep.reject, f"4-point matrix energy statistic {rep.statistic:.4f}, p={rep.p_value:.4f}")


# ----------------------------------------------------------------------------
# 7. coupling discrepancy decreases with m


def test_criterion_7_discrepancy_decreases(window_at):
    med = {}
    for m in (14, 16, 18):
        w = window_at(m)
        g = hypercube(m)
        vals = []
        for s in range(30):
            wc = extract_weighted_components(PercolationSample(g, SAMPLE_OFFSET + s), w)
            vals.append(discrepancy_mass(build_pair(wc, w, SAMPLE_OFFSET + s)))
        med[m] = float(np.median(vals))
    ok = med[14] > med[16] > med[18]
    verdict(7, ok, "median discrepancy " + ", ".join(f"m={m}: {v:.4g}" for m, v in med.items()))


# ----------------------------------------------------------------------------
# 8. window invariants, expansion, width


@lru_cache(maxsize=None)
def _kappa(lam: float, V: int):
    return kappa_auto(lam, V)


def test_criterion_8_window(window_at):
    bad = {}
    gaps = {}
    for m in (14, 16, 18, 20):
        w = window_at(m)
        bad[m] = w.violations()
        gaps[m] = expansion_gap(w)
    ok_inv = not any(bad.values())
    ok_exp = all(gap <= allowed for gap, allowed in gaps.values())
    budgets = {14: 2000, 18: 1000}
    ratios = {}
    for m, budget in budgets.items():
        g = hypercube(m)
        reps = [window_width_check(g, -1.0, 1.0, budget, kappa=lambda lam: _kappa(lam, g.V),
                                   base_seed=SAMPLE_OFFSET + r * budget, max_doublings=0).ratio
                for r in range(5)]
        ratios[m] = float(np.median(reps))
    ok_width = 0.3 <= ratios[14] <= 3 and abs(ratios[18] - 1) < abs(ratios[14] - 1)
    ok = ok_inv and ok_exp and ok_width
    verdict(8, ok, f"invariant violations {bad}, expansion gap/allowed "
                   + str({m: f"{a:.2e}/{b:.2e}" for m, (a, b) in gaps.items()})
                   + f", median width ratio m=14: {ratios[14]:.3f}, m=18: {ratios[18]:.3f}")


# ----------------------------------------------------------------------------
# 9. metric measure space routines against definitions


def _random_space(rng, k):
    pts = rng.uniform(0, 1, (k, 2))
    return FiniteMMSpace(cdist(pts, pts), rng.uniform(0.1, 1.0, k))


def test_criterion_9_mmspace():
    rng = np.random.default_rng(9)
    worst_h = worst_p = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 12))
        d = _random_space(rng, k).d
        A = rng.choice(k, int(rng.integers(1, k + 1)), replace=False)
        B = rng.choice(k, int(rng.integers(1, k + 1)), replace=False)
        worst_h = max(worst_h, abs(hausdorff(d, A, B) - hausdorff_oracle(d.tolist(), A.tolist(), B.tolist())))
    for _ in range(100):
        k = int(rng.integers(1, 7))
        d = _random_space(rng, k).d
        mu = rng.uniform(0, 1, k) * (rng.uniform(size=k) < 0.8)
        nu = rng.uniform(0, 1, k) * (rng.uniform(size=k) < 0.8)
        worst_p = max(worst_p, abs(prokhorov(d, mu, nu) - prokhorov_oracle(d.tolist(), mu.tolist(), nu.tolist())))
    ident = all(ghp_bruteforce(X, X) == 0.0 for X in (_random_space(rng, int(rng.integers(1, 5))) for _ in range(10)))
    tri = 0
    for _ in range(15):
        X, Y, Z = (_random_space(rng, int(rng.integers(1, 5))) for _ in range(3))
        tri += ghp_bruteforce(X, Z) <= ghp_bruteforce(X, Y) + ghp_bruteforce(Y, Z) + 1e-9
    seq = MMSequence([_random_space(rng, 3), _random_space(rng, 2)])
    l4_self = l4_sequence_distance(seq, seq)[0]
    ok = worst_h <= 1e-12 and worst_p <= 1e-12 and ident and tri == 15 and l4_self == 0.0
    verdict(9, ok, f"hausdorff err {worst_h:.1e}, prokhorov err {worst_p:.1e}, GHP identity {ident}, "
                   f"triangle {tri}/15, l4 self-distance {l4_self}")


# ----------------------------------------------------------------------------
# 10. byte-identical reruns


SMALL_CONFIG = """
experiment = {name}
m = 10
lambda = 0
seed = 11
seeds = 4
kappa = 1.7
calib_budget = 1000
n_perm = 199
reps = 2
n_pairs = 5
"""


def test_criterion_10_reproducible_outputs(tmp_path):
    differing = []
    for name in sorted(REGISTRY):
        cfg = ExperimentConfig.from_text(SMALL_CONFIG.format(name=name))
        a = run_experiment(cfg, tmp_path / name / "a")
        b = run_experiment(cfg, tmp_path / name / "b")
        files = sorted(a.files)
        if files != sorted(b.files):
            differing.append(name)
            continue
        for f in files:
            if a.files[f].read_bytes() != b.files[f].read_bytes():
                differing.append(f"{name}/{f}")
        if a.manifest.read_bytes() != b.manifest.read_bytes():
            differing.append(f"{name}/manifest.json")
    verdict(10, not differing, f"{len(REGISTRY)} experiments rerun, differing outputs: {differing or 'none'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
