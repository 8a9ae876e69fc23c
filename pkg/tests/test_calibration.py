import dataclasses
import math

import mpmath
import numpy as np
import pytest

from percolab.calibration import (ChiGrid, WindowParams, bisection_tolerance, calibrate_pc,
                                  calibrate_target, chi_at, derive_window, expansion_gap,
                                  p_c_prime_formula, position_check, window_width_check)
from percolab.errors import InputError
from percolab.percolation import PercolationSample
from percolab.substrate import alpha_m, hypercube


def test_target_endpoints():
    g = hypercube(8)
    est = calibrate_target(g, 1.0, 1000)
    assert est.p_c_hat == 0.0 and est.status == "exact"
    est = calibrate_target(g, float(g.V), 1000)
    assert est.p_c_hat == 1.0 and est.status == "endpoint"


def test_calibration_errors():
    g = hypercube(8)
    with pytest.raises(InputError):
        calibrate_target(g, g.V + 1.0, 1000)
    with pytest.raises(InputError):
        calibrate_target(g, 10.0, 999)
    with pytest.raises(InputError):
        calibrate_pc(g, 0.0, 0.0, 1000)
    with pytest.raises(InputError):
        calibrate_pc(g, 0.0, -1.0, 1000)


def test_chi_at_matches_direct_average():
    g = hypercube(7)
    ps = [0.3, 0.1, 0.2]
    mean, se = chi_at(g, ps, 25, base_seed=3)
    for k, p in enumerate(ps):
        vals = [PercolationSample(g, s).stats(p).sum_sq / g.V for s in range(3, 28)]
        assert mean[k] == pytest.approx(np.mean(vals), rel=1e-14)
        assert se[k] == pytest.approx(np.std(vals, ddof=1) / 5, rel=1e-10)


def test_chi_grid_rejects_bad_grid():
    with pytest.raises(InputError):
        ChiGrid(hypercube(4), [0.2, 0.1], range(2))


def test_bisection_bracket_straddles_target():
    g = hypercube(10)
    target = 1.8 * g.V ** (1 / 3)
    est = calibrate_target(g, target, 1000, base_seed=11)
    lo, hi = est.chi_bracket
    assert lo <= target <= hi
    assert est.bracket[0] <= est.p_c_hat <= est.bracket[1]
    assert est.ci[0] <= est.p_c_hat <= est.ci[1]
    if est.status == "ok":
        assert est.bracket[1] - est.bracket[0] < bisection_tolerance(g)
    again = calibrate_target(g, target, 1000, base_seed=11)
    assert again == est


def test_doubling_cap_reports_ambiguity():
    g = hypercube(8)
    est = calibrate_target(g, 1.8 * g.V ** (1 / 3), 1000, max_doublings=0)
    assert est.doublings == 0 and est.n_samples == 1000
    assert est.status in ("ok", "ambiguous")


def test_m20_window_formula():
    # direct re-evaluation in 30-digit arithmetic
    mpmath.mp.dps = 30
    m, V = 20, 2**20
    p_c = 1 / 19
    a = mpmath.log(20) / 20
    expect = mpmath.mpf(1) / 19 * (1 - mpmath.mpf(2) ** (mpmath.mpf(-20) / 3) * a ** (mpmath.mpf(-1) / 3))
    w = derive_window(hypercube(m), 0.0, p_c, 1)
    assert w.p_s == pytest.approx(float(expect), rel=1e-12)
    assert w.M_s == max(1, int(mpmath.floor(mpmath.mpf(V) ** (mpmath.mpf(2) / 3) * a**4)))
    assert w.alpha_m == pytest.approx(float(a), rel=1e-14)
    assert w.violations() == []


def test_window_invariants_and_tampering():
    g = hypercube(10)
    w = derive_window(g, 0.5, 0.12, 200)
    assert w.violations() == []
    V3 = g.V ** (1 / 3)
    assert abs(w.q_lambda - (V3 / w.chi_ps_hat + 0.5)) <= 1e-12
    assert abs(w.p_c_prime - (1 - (1 - w.p_s) * math.exp(-w.q_lambda / (g.m * V3)))) <= 1e-12
    assert dataclasses.replace(w, p_s=w.p_s * (1 + 1e-9)).violations() != []
    assert "M_s" in dataclasses.replace(w, M_s=w.M_s + 1).violations()
    d = w.to_dict()
    assert d["lambda"] == 0.5 and "lam" not in d and isinstance(d["p_c_hat_ci"], list)


def test_derive_window_errors():
    with pytest.raises(InputError):
        derive_window(hypercube(8), 0.0, 0.0, 10)
    with pytest.raises(InputError):
        derive_window(hypercube(8), 0.0, 1.0, 10)
    # V^{1/3} alpha^{1/3} <= 1 puts p_s at or below zero
    with pytest.raises(InputError):
        derive_window(hypercube(2), 0.0, 0.5, 10, alpha=0.1)
    with pytest.raises(InputError):
        derive_window(hypercube(1), 0.0, 0.5, 10)
    # lambda far below the window makes q negative
    with pytest.raises(InputError):
        derive_window(hypercube(8), -100.0, 0.15, 10)


def test_expansion_gap_small_m():
    w = derive_window(hypercube(12), 0.0, 1 / 11, 300)
    gap, allowed = expansion_gap(w)
    assert gap <= allowed


def test_p_c_prime_formula_limits():
    assert p_c_prime_formula(0.1, 0.0, 10, 1024) == pytest.approx(0.1, abs=1e-15)
    assert p_c_prime_formula(0.1, 1e9, 10, 1024) == pytest.approx(1.0)


def test_window_width_rejects_degenerate_interval():
    g = hypercube(8)
    with pytest.raises(InputError):
        window_width_check(g, 1.0, 1.0, 1000, kappa=lambda lam: (1.0, 0.0))
    with pytest.raises(InputError):
        window_width_check(g, 1.0, 0.0, 1000, kappa=lambda lam: (1.0, 0.0))


def test_window_width_fixed_kappa():
    g = hypercube(10)
    rep = window_width_check(g, -1.0, 1.0, 1000, kappa=lambda lam: (1.5 + 0.3 * lam, 0.0), max_doublings=0)
    assert rep.ratio > 0
    assert rep.ci[0] <= rep.ratio <= rep.ci[1]


def test_window_params_field_names():
    names = {f.name for f in dataclasses.fields(WindowParams)}
    assert {"m", "V", "lam", "alpha_m", "p_c_hat", "p_c_hat_ci", "p_s", "M_s", "chi_ps_hat",
            "chi_ps_hat_ci", "q_lambda", "p_c_prime", "kappa_hat", "kappa_hat_ci"} <= names


# soft diagnostics on the shared m >= 14 calibrations


def test_pc_near_inverse_degree_m14(pc_at):
    m = 14
    x = (m - 1) * pc_at(m).p_c_hat
    print(f"(m-1) p_c_hat at m=14: {x:.5f}")
    assert 1 - 10 / m**2 <= x <= 1 + 10 / m**2


@pytest.mark.parametrize("m", [14, 16, 18])
def test_chi_ps_bracket(window_at, m):
    w = window_at(m)
    r = w.chi_ps_hat * w.V ** (-1 / 3) * w.alpha_m ** (-1 / 3)
    print(f"chi(p_s) V^-1/3 alpha^-1/3 at m={m}: {r:.4f}")
    assert 0.5 <= r <= 2


def test_position_in_window_m14(window_at):
    w = window_at(14)
    r, se = position_check(hypercube(14), w, 1000)
    print(f"chi(p'_c)/chi(p_c_hat) at m=14: {r:.4f} +- {se:.4f}")
    assert 0.5 - 3 * se <= r <= 2 + 3 * se
    assert alpha_m(14) == w.alpha_m
