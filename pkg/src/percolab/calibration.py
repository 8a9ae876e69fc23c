"""Scaling-window arithmetic on a transitive graph.

The critical point p_c(lambda) is the p at which the susceptibility reaches
kappa(lambda) V^{1/3}. The susceptibility is estimated by sum_i |C_i|^2 / V
(same mean as |C(v)|, much smaller variance), evaluated for a fixed set of
seeds on a fine p-grid. Every seed's curve is monotone in p, so the averaged
curve is too, and bisection on it is exact for that sample.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .errors import InputError
from .limit_oracle import kappa_er
from .percolation import _graph_args
from .rng import STREAM_EDGES, derive_key
from .substrate import TransitiveGraph, alpha_m

MIN_BUDGET = 1000
Z_CI = 1.959963984540054


def _mean_se(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = rows.shape[0]
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, np.nan)
    return mean, se


class ChiGrid:
    """Per-seed values of sum|C|^2/V at every point of an ascending p-grid."""

    def __init__(self, g: TransitiveGraph, ps, seeds):
        self.graph = g
        self.ps = np.ascontiguousarray(ps, dtype=np.float64)
        if self.ps.ndim != 1 or self.ps.size == 0 or np.any(np.diff(self.ps) < 0):
            raise InputError("grid must be a nonempty ascending array")
        self.seeds: list[int] = []
        self._rows: list[np.ndarray] = []
        self.extend(seeds)

    def extend(self, seeds) -> None:
        m, table, hyper = _graph_args(self.graph)
        V = self.graph.V
        for sd in seeds:
            key = derive_key(int(sd), STREAM_EDGES)
            self._rows.append(K.s2_at(V, m, table, hyper, key, self.ps) / V)
            self.seeds.append(int(sd))

    def __len__(self) -> int:
        return len(self.seeds)

    @property
    def rows(self) -> np.ndarray:
        return np.vstack(self._rows)

    def chi(self, j: int) -> tuple[float, float]:
        col = np.array([r[j] for r in self._rows])
        se = col.std(ddof=1) / math.sqrt(col.size) if col.size > 1 else float("nan")
        return float(col.mean()), float(se)

    def curve(self) -> tuple[np.ndarray, np.ndarray]:
        return _mean_se(self.rows)


def chi_at(g: TransitiveGraph, ps, n_samples: int, base_seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of sum|C|^2/V at each p in ``ps`` (common seeds)."""
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    ps = np.atleast_1d(np.asarray(ps, dtype=np.float64))
    order = np.argsort(ps)
    grid = ChiGrid(g, ps[order], range(base_seed, base_seed + n_samples))
    mean, se = grid.curve()
    out_m = np.empty_like(mean)
    out_s = np.empty_like(se)
    out_m[order] = mean
    out_s[order] = se
    return out_m, out_s


@dataclass
class PcEstimate:
    p_c_hat: float
    ci: tuple[float, float]
    target: float
    bracket: tuple[float, float]
    chi_bracket: tuple[float, float]
    n_samples: int
    doublings: int
    status: str  # exact | ok | ambiguous | endpoint

    def __iter__(self):
        yield self.p_c_hat
        yield self.ci


def bisection_tolerance(g: TransitiveGraph) -> float:
    return 1.0 / (10.0 * g.m * g.V ** (1.0 / 3.0))


def _grid(p_hi: float, step: float) -> np.ndarray:
    n = int(math.ceil(p_hi / step))
    return np.linspace(0.0, p_hi, n + 1)


def calibrate_target(g: TransitiveGraph, target: float, mc_budget: int, base_seed: int = 0,
                     target_se: float = 0.0, max_doublings: int = 3,
                     grid: ChiGrid | None = None) -> PcEstimate:
    """Bisection for chi(p) = target on the grid [0, p_hi].

    p_hi starts at 1.25/(m-1) and widens to 2/(m-1) if the target is not
    reached. A probe whose Monte Carlo CI contains the target doubles the seed
    count (at most ``max_doublings`` times); after that the bracket is
    reported as ambiguous. ``target_se`` only widens the returned CI. ``grid`` reuses
    precomputed curves (common random numbers across several targets).
    """
    V = g.V
    if mc_budget < MIN_BUDGET:
        raise InputError(f"mc_budget must be >= {MIN_BUDGET}")
    if target > V:
        raise InputError(f"target {target} exceeds V = {V}: beyond the window")
    if target < 1:
        raise InputError("target below chi(0) = 1")
    if target == 1:
        return PcEstimate(0.0, (0.0, 0.0), 1.0, (0.0, 0.0), (1.0, 1.0), 0, 0, "exact")
    if target == V:
        return PcEstimate(1.0, (1.0, 1.0), float(V), (1.0, 1.0), (float(V), float(V)), 0, 0, "endpoint")
    if g.m < 2:
        raise InputError("calibration needs m >= 2")
    tol = bisection_tolerance(g)
    if grid is None:
        seeds = range(base_seed, base_seed + mc_budget)
        grid = ChiGrid(g, _grid(1.25 / (g.m - 1), tol / 2), seeds)
        if grid.chi(grid.ps.size - 1)[0] < target:
            grid = ChiGrid(g, _grid(2.0 / (g.m - 1), tol / 2), seeds)
    ps = grid.ps
    lo, hi = 0, ps.size - 1
    c_hi = grid.chi(hi)[0]
    if c_hi < target:
        return PcEstimate(float(ps[hi]), (float(ps[hi]), float(ps[hi])), float(target),
                          (float(ps[hi]), float(ps[hi])), (c_hi, c_hi), len(grid), 0, "endpoint")
    doublings = 0
    status = "ok"
    while ps[hi] - ps[lo] >= tol and hi - lo > 1:
        mid = (lo + hi) // 2
        c, se = grid.chi(mid)
        if abs(c - target) <= Z_CI * se:
            if doublings < max_doublings:
                n0 = len(grid)
                start = max(grid.seeds) + 1
                grid.extend(range(start, start + n0))
                doublings += 1
                continue
            status = "ambiguous"
            break
        if c < target:
            lo = mid
        else:
            hi = mid
    c_lo = grid.chi(lo)[0]
    c_hi = grid.chi(hi)[0]
    frac = (target - c_lo) / (c_hi - c_lo) if c_hi > c_lo else 0.5
    p_hat = float(ps[lo] + frac * (ps[hi] - ps[lo]))
    mean, se = grid.curve()
    spread = Z_CI * np.hypot(se, target_se)
    above = np.flatnonzero(mean + spread >= target)
    below = np.flatnonzero(mean - spread <= target)
    ci_lo = float(ps[above[0]]) if above.size else float(ps[-1])
    ci_hi = float(ps[min(below[-1] + 1, ps.size - 1)]) if below.size else float(ps[0])
    return PcEstimate(p_hat, (min(ci_lo, p_hat), max(ci_hi, p_hat)), float(target),
                      (float(ps[lo]), float(ps[hi])), (c_lo, c_hi), len(grid), doublings, status)


def calibrate_pc(g: TransitiveGraph, lam: float, kappa_hat: float, mc_budget: int,
                 base_seed: int = 0, kappa_se: float = 0.0, **kw) -> PcEstimate:
    """p with chi-hat(p) = kappa_hat V^{1/3}; unpacks as (p_c_hat, CI).

    ``lam`` is carried for the record only; ``kappa_se`` widens the CI by the
    uncertainty of kappa_hat.
    """
    if not kappa_hat > 0:
        raise InputError("kappa_hat must be positive")
    scale = g.V ** (1.0 / 3.0)
    return calibrate_target(g, kappa_hat * scale, mc_budget, base_seed,
                            target_se=kappa_se * scale, **kw)


def kappa_auto(lam: float, V: int, n_samples: int = 300, base_seed: int = 7_000_000) -> tuple[float, float]:
    """kappa-hat(lambda) from Erdos-Renyi graphs with n = V vertices (n >= 1000)."""
    return kappa_er(lam, max(int(V), 1000), n_samples, base_seed)


@dataclass
class WindowParams:
    m: int
    V: int
    lam: float
    alpha_m: float
    p_c_hat: float
    p_c_hat_ci: tuple[float, float]
    p_s: float
    M_s: int
    chi_ps_hat: float
    chi_ps_hat_ci: tuple[float, float]
    q_lambda: float
    p_c_prime: float
    kappa_hat: float = float("nan")
    kappa_hat_ci: tuple[float, float] = (float("nan"), float("nan"))
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def violations(self, tol: float = 1e-12) -> list[str]:
        """Invariants that fail (empty when the record is consistent)."""
        out = []
        V3 = self.V ** (1.0 / 3.0)
        if abs(self.p_s - p_s_formula(self.p_c_hat, self.V, self.alpha_m)) > tol:
            out.append("p_s")
        if self.M_s != M_s_formula(self.V, self.alpha_m):
            out.append("M_s")
        if abs(self.q_lambda - (V3 / self.chi_ps_hat + self.lam)) > tol * max(1.0, abs(self.q_lambda)):
            out.append("q_lambda")
        if abs(self.p_c_prime - p_c_prime_formula(self.p_s, self.q_lambda, self.m, self.V)) > tol:
            out.append("p_c_prime")
        if not 0 < self.p_s < self.p_c_prime < 1:
            out.append("p_s < p_c_prime ordering")
        if not 0 < self.p_s < self.p_c_hat < 1:
            out.append("p_s < p_c_hat ordering")
        return out


def p_s_formula(p_c: float, V: int, alpha: float) -> float:
    return p_c * (1.0 - V ** (-1.0 / 3.0) * alpha ** (-1.0 / 3.0))


def M_s_formula(V: int, alpha: float) -> int:
    return max(1, int(math.floor(V ** (2.0 / 3.0) * alpha**4)))


def p_c_prime_formula(p_s: float, q: float, m: int, V: int) -> float:
    return 1.0 - (1.0 - p_s) * math.exp(-q / (m * V ** (1.0 / 3.0)))


def derive_window(g: TransitiveGraph, lam: float, p_c_hat: float, mc_budget: int,
                  base_seed: int = 1_000_000, alpha: float | None = None,
                  p_c_ci: tuple[float, float] | None = None,
                  kappa_hat: float = float("nan"),
                  kappa_ci: tuple[float, float] = (float("nan"), float("nan"))) -> WindowParams:
    """Window quantities around a calibrated p_c, measuring chi(p_s) by Monte Carlo."""
    if not 0.0 < p_c_hat < 1.0:
        raise InputError("p_c_hat must lie in (0, 1)")
    if mc_budget < 1:
        raise InputError("mc_budget must be >= 1")
    m, V = g.m, g.V
    a = alpha_m(m) if alpha is None else float(alpha)
    if not a > 0:
        raise InputError(f"alpha = {a} must be positive (log(m)/m vanishes at m = 1)")
    p_s = p_s_formula(p_c_hat, V, a)
    if p_s <= 0:
        raise InputError(f"p_s = {p_s} <= 0: V^(1/3) alpha^(1/3) <= 1, m too small for the window")
    (chi,), (se,) = chi_at(g, [p_s], mc_budget, base_seed)
    chi, se = float(chi), float(se)
    q = V ** (1.0 / 3.0) / chi + lam
    if q <= 0:
        raise InputError(f"q_lambda = {q} <= 0: lambda lies below the window")
    w = WindowParams(
        m=m, V=V, lam=float(lam), alpha_m=a,
        p_c_hat=float(p_c_hat),
        p_c_hat_ci=tuple(p_c_ci) if p_c_ci is not None else (float(p_c_hat), float(p_c_hat)),
        p_s=p_s, M_s=M_s_formula(V, a),
        chi_ps_hat=chi, chi_ps_hat_ci=(chi - Z_CI * se, chi + Z_CI * se),
        q_lambda=q, p_c_prime=p_c_prime_formula(p_s, q, m, V),
        kappa_hat=float(kappa_hat), kappa_hat_ci=tuple(kappa_ci),
    )
    return w


def expansion_gap(w: WindowParams) -> tuple[float, float]:
    """(|p'_c - first-order expansion|, allowed second-order remainder)."""
    V3 = w.V ** (1.0 / 3.0)
    first = w.p_s + ((1.0 - w.p_s) / w.chi_ps_hat + w.lam / V3) / w.m
    x = w.q_lambda / (w.m * V3)
    return abs(w.p_c_prime - first), 10.0 * x * x


def calibrate_window(g: TransitiveGraph, lam: float, mc_budget: int, kappa: float | None = None,
                     kappa_se: float = 0.0, base_seed: int = 0) -> tuple[WindowParams, PcEstimate]:
    """calibrate_pc followed by derive_window; kappa None means :func:`kappa_auto`."""
    if kappa is None:
        kappa, kappa_se = kappa_auto(lam, g.V)
    est = calibrate_pc(g, lam, kappa, mc_budget, base_seed, kappa_se=kappa_se)
    w = derive_window(g, lam, est.p_c_hat, mc_budget, base_seed + 1_000_000, p_c_ci=est.ci,
                      kappa_hat=kappa, kappa_ci=(kappa - Z_CI * kappa_se, kappa + Z_CI * kappa_se))
    if est.status != "ok":
        w.notes.append(f"calibration status: {est.status}")
    return w, est


@dataclass
class WidthReport:
    ratio: float
    ci: tuple[float, float]
    p1: PcEstimate
    p2: PcEstimate


def window_width_check(g: TransitiveGraph, lambda1: float, lambda2: float, mc_budget: int,
                       kappa=None, base_seed: int = 0, max_doublings: int = 3) -> WidthReport:
    """(p_c(lambda2) - p_c(lambda1)) m V^{1/3} / (lambda2 - lambda1).

    Both calibrations share one set of curves. ``kappa`` maps lambda to
    (kappa_hat, se); None uses :func:`kappa_auto`.
    """
    if not lambda2 > lambda1:
        raise InputError("need lambda2 > lambda1")
    if mc_budget < MIN_BUDGET:
        raise InputError(f"mc_budget must be >= {MIN_BUDGET}")
    kfun = kappa if kappa is not None else (lambda lam: kappa_auto(lam, g.V))
    k1, s1 = kfun(lambda1)
    k2, s2 = kfun(lambda2)
    scale = g.V ** (1.0 / 3.0)
    tol = bisection_tolerance(g)
    seeds = range(base_seed, base_seed + mc_budget)
    grid = ChiGrid(g, _grid(1.25 / (g.m - 1), tol / 2), seeds)
    if grid.chi(grid.ps.size - 1)[0] < max(k1, k2) * scale:
        grid = ChiGrid(g, _grid(2.0 / (g.m - 1), tol / 2), seeds)
    e1 = calibrate_target(g, k1 * scale, mc_budget, target_se=s1 * scale, grid=grid,
                          max_doublings=max_doublings)
    e2 = calibrate_target(g, k2 * scale, mc_budget, target_se=s2 * scale, grid=grid,
                          max_doublings=max_doublings)
    f = g.m * scale / (lambda2 - lambda1)
    ratio = (e2.p_c_hat - e1.p_c_hat) * f
    return WidthReport(ratio, ((e2.ci[0] - e1.ci[1]) * f, (e2.ci[1] - e1.ci[0]) * f), e1, e2)


def position_check(g: TransitiveGraph, w: WindowParams, n_samples: int,
                   base_seed: int = 2_000_000) -> tuple[float, float]:
    """chi-hat(p'_c) / chi-hat(p_c_hat) on common seeds, with a delta-method SE."""
    rows = ChiGrid(g, np.sort([w.p_c_hat, w.p_c_prime]), range(base_seed, base_seed + n_samples)).rows
    if w.p_c_prime < w.p_c_hat:
        rows = rows[:, ::-1]
    a, b = rows[:, 1], rows[:, 0]  # p'_c, p_c_hat
    r = a.mean() / b.mean()
    if n_samples < 2:
        return float(r), float("nan")
    # delta method for a ratio of correlated means
    cov = np.cov(a, b) / n_samples
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / b.mean() ** 2
    return float(r), float(math.sqrt(max(var, 0.0)))
