import sys
from functools import lru_cache

import pytest

from percolab.calibration import calibrate_pc, derive_window, kappa_auto
from percolab.substrate import hypercube

# budgets for the shared m >= 14 calibrations (one core)
CALIB = {14: (2000, 1), 16: (2000, 1), 18: (2000, 1), 20: (1000, 0)}
WINDOW_BUDGET = {14: 2000, 16: 2000, 18: 2000, 20: 1000}


@lru_cache(maxsize=None)
def kappa0(m: int) -> tuple[float, float]:
    return kappa_auto(0.0, 2**m)


@lru_cache(maxsize=None)
def calibrated(m: int):
    """(PcEstimate, WindowParams) at lambda = 0, computed once per session."""
    g = hypercube(m)
    k, se = kappa0(m)
    budget, doublings = CALIB[m]
    est = calibrate_pc(g, 0.0, k, budget, base_seed=0, kappa_se=se, max_doublings=doublings)
    w = derive_window(g, 0.0, est.p_c_hat, WINDOW_BUDGET[m], base_seed=1_000_000, p_c_ci=est.ci,
                      kappa_hat=k, kappa_ci=(k - 1.96 * se, k + 1.96 * se))
    return est, w


@pytest.fixture(scope="session")
def window_at():
    return lambda m: calibrated(m)[1]


@pytest.fixture(scope="session")
def pc_at():
    return lambda m: calibrated(m)[0]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def pytest_collection_modifyitems(items):
    # anything that touches the m >= 14 calibrations is slow
    for item in items:
        if {"window_at", "pc_at"} & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)
