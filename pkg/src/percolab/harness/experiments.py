"""Experiment registry and the on-disk result bundle."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .. import __version__
from ..calibration import Z_CI, calibrate_pc, derive_window, kappa_auto, window_width_check
from ..component_graphs import (build_pair, discrepancy_mass, extract_weighted_components,
                                metric_comparison)
from ..errors import InputError
from ..limit_oracle import er_edge_probability, er_edges, er_size_vector, sample_excursions
from ..mmspace import from_component, gp_distance_matrix
from ..multiplicative import WeightVector, check_conditions
from ..percolation import PercolationSample, long_thin_scan, tail_and_l4_stats
from ..rng import STREAM_MISC, generator
from ..substrate import hypercube
from .config import ExperimentConfig
from .stats import REPORT_HEADER, TwoSampleReport, distance_matrix_test, energy_test

# seed offsets keep calibration, window and per-replicate streams apart
CALIB_OFFSET = 100_000_000
WINDOW_OFFSET = 200_000_000
KAPPA_OFFSET = 300_000_000


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class ResultBundle:
    out_dir: Path
    files: dict[str, Path]
    reports: list[tuple[dict, TwoSampleReport]]
    manifest: Path
    wall_time: float


class _Run:
    """Per-run context: config plus cached calibrations."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.tables: dict[str, Table] = {}
        self.reports: list[tuple[dict, TwoSampleReport]] = []
        self._kappa: dict[tuple[float, int], tuple[float, float]] = {}
        self._pc: dict[tuple[int, float], float] = {}
        self._win: dict[tuple[int, float], object] = {}

    def table(self, name: str, header: list[str]) -> Table:
        if name not in self.tables:
            self.tables[name] = Table(name, header)
        return self.tables[name]

    def kappa(self, lam: float, V: int) -> tuple[float, float]:
        val = str(self.cfg.budget("kappa")).strip()
        if val != "auto":
            try:
                return float(val), 0.0
            except ValueError:
                raise InputError(f"kappa must be a number or 'auto', got {val!r}") from None
        key = (lam, V)
        if key not in self._kappa:
            self._kappa[key] = kappa_auto(lam, V, int(self.cfg.budget("kappa_samples")),
                                          self.cfg.base_seed + KAPPA_OFFSET)
        return self._kappa[key]

    def p_c(self, m: int, lam: float) -> float:
        key = (m, lam)
        if key not in self._pc:
            fixed = self.cfg.p_c_for(m)
            if fixed is not None:
                self._pc[key] = fixed
            else:
                g = hypercube(m)
                k, se = self.kappa(lam, g.V)
                est = calibrate_pc(g, lam, k, int(self.cfg.budget("calib_budget")),
                                   self.cfg.base_seed + CALIB_OFFSET, kappa_se=se)
                self._pc[key] = est.p_c_hat
        return self._pc[key]

    def window(self, m: int, lam: float):
        key = (m, lam)
        if key not in self._win:
            g = hypercube(m)
            k, se = self.kappa(lam, g.V)
            self._win[key] = derive_window(g, lam, self.p_c(m, lam), int(self.cfg.budget("calib_budget")),
                                           self.cfg.base_seed + WINDOW_OFFSET, kappa_hat=k,
                                           kappa_ci=(k - Z_CI * se, k + Z_CI * se))
        return self._win[key]

    def report(self, tag: dict, rep: TwoSampleReport) -> None:
        self.reports.append((tag, rep))


REGISTRY: dict = {}


def register(name: str):
    def deco(fn):
        REGISTRY[name] = fn
        return fn
    return deco


def _grid(cfg: ExperimentConfig):
    if not cfg.m:
        raise InputError(f"experiment {cfg.experiment!r} needs at least one m")
    for m in cfg.m:
        for lam in cfg.lam:
            yield m, lam


def _top(sizes: np.ndarray, k: int, scale: float) -> list[float]:
    out = np.zeros(k)
    top = np.asarray(sizes[:k], dtype=float) / scale
    out[:top.size] = top
    return out.tolist()


@register("noop")
def _noop(run: _Run) -> None:
    pass


def _sizes_vs(run: _Run, other: str) -> None:
    cfg = run.cfg
    k = int(cfg.budget("top_k"))
    t = run.table("sizes", ["m", "lambda", "source", "seed"] + [f"s{i + 1}" for i in range(k)])
    for m, lam in _grid(cfg):
        g = hypercube(m)
        p = run.p_c(m, lam)
        X, Y = [], []
        for s in cfg.seeds():
            x = _top(PercolationSample(g, s).stats(p).sizes, k, g.V ** (2.0 / 3.0))
            X.append(x)
            t.rows.append([m, lam, "hypercube", s] + x)
        for s in cfg.seeds():
            if other == "er":
                y = er_size_vector(g.V, lam, s, k).tolist()
            else:
                y = _top(sample_excursions(lam, seed=s).lengths, k, 1.0)
            Y.append(y)
            t.rows.append([m, lam, other, s] + y)
        if X:
            run.report({"m": m, "lambda": lam},
                       energy_test(X, Y, int(cfg.budget("n_perm")), cfg.base_seed, cfg.budget("alpha")))


@register("sizes-vs-er")
def _sizes_vs_er(run: _Run) -> None:
    _sizes_vs(run, "er")


@register("sizes-vs-brownian")
def _sizes_vs_brownian(run: _Run) -> None:
    _sizes_vs(run, "brownian")


@register("mult-vs-sprinkled")
def _mult_vs_sprinkled(run: _Run) -> None:
    cfg = run.cfg
    k = int(cfg.budget("top_k"))
    t = run.table("graphs", ["m", "lambda", "seed", "graph", "n_nodes", "discrepancy"]
                  + [f"s{i + 1}" for i in range(k)])
    for m, lam in _grid(cfg):
        w = run.window(m, lam)
        g = hypercube(m)
        X, Y = [], []
        for s in cfg.seeds():
            wc = extract_weighted_components(PercolationSample(g, s), w)
            pair = build_pair(wc, w, s)
            disc = discrepancy_mass(pair)
            x = _top(pair.g_x.component_masses(), k, g.V ** (2.0 / 3.0))
            y = _top(pair.g_s.component_masses(), k, g.V ** (2.0 / 3.0))
            X.append(x)
            Y.append(y)
            t.rows.append([m, lam, s, "mult", wc.n, disc] + x)
            t.rows.append([m, lam, s, "sprinkled", wc.n, disc] + y)
        if X:
            run.report({"m": m, "lambda": lam},
                       energy_test(X, Y, int(cfg.budget("n_perm")), cfg.base_seed, cfg.budget("alpha")))


@register("metric-comparison")
def _metric_comparison(run: _Run) -> None:
    cfg = run.cfg
    t = run.table("metric", ["m", "lambda", "seed", "pair", "d_box", "d_comp", "outside", "same_ps_comp"])
    for m, lam in _grid(cfg):
        w = run.window(m, lam)
        g = hypercube(m)
        for s in cfg.seeds():
            wc = extract_weighted_components(PercolationSample(g, s), w)
            mr = metric_comparison(wc, w, int(cfg.budget("radius")), int(cfg.budget("n_pairs")), seed=s)
            for i in range(mr.d_box.size):
                t.rows.append([m, lam, s, i, mr.d_box[i], mr.d_comp[i], mr.outside[i], mr.same_ps_comp[i]])


@register("window-width")
def _window_width(run: _Run) -> None:
    cfg = run.cfg
    if not cfg.m:
        raise InputError("window-width needs at least one m")
    l1, l2 = (cfg.lam[0], cfg.lam[1]) if len(cfg.lam) >= 2 else (-1.0, 1.0)
    budget = int(cfg.budget("calib_budget"))
    t = run.table("width", ["m", "lambda1", "lambda2", "rep", "p1", "p2", "ratio", "ci_lo", "ci_hi"])
    for m in cfg.m:
        g = hypercube(m)
        for rep in range(int(cfg.budget("reps"))):
            wr = window_width_check(g, l1, l2, budget, kappa=lambda lam: run.kappa(lam, g.V),
                                    base_seed=cfg.base_seed + CALIB_OFFSET + rep * budget)
            t.rows.append([m, l1, l2, rep, wr.p1.p_c_hat, wr.p2.p_c_hat, wr.ratio, wr.ci[0], wr.ci[1]])


@register("tightness-scan")
def _tightness_scan(run: _Run) -> None:
    cfg = run.cfg
    k = int(cfg.budget("top_k"))
    t = run.table("tails", ["m", "lambda", "seed", "k", "mass_tail", "diam_tail", "bound_used"])
    lt = run.table("long_thin", ["m", "lambda", "seed", "R", "M", "count", "scanned"])
    for m, lam in _grid(cfg):
        g = hypercube(m)
        p = run.p_c(m, lam)
        R = int(cfg.budget("R")) or max(1, round(g.V ** (1.0 / 3.0)))
        M = int(cfg.budget("M")) or max(1, round(g.V ** (2.0 / 3.0)))
        for s in cfg.seeds():
            sample = PercolationSample(g, s)
            st = sample.stats(p, diameters=True)
            for j in range(1, k + 1):
                mass, diam, flag = tail_and_l4_stats(st, j)
                t.rows.append([m, lam, s, j, mass, diam, flag])
            count, scanned = long_thin_scan(sample, p, R, M, cap=int(cfg.budget("scan_cap")),
                                            subsample_seed=s)
            lt.rows.append([m, lam, s, R, M, count, scanned])


@register("conditions-report")
def _conditions_report(run: _Run) -> None:
    cfg = run.cfg
    t = run.table("conditions", ["m", "lambda", "seed", "n", "q", "sigma2", "sigma3_over_sigma2_cubed",
                                 "q_minus_inv_sigma2", "max_over_sigma2", "max_over_sigma2_pow",
                                 "sigma2_pow_r0_over_min"])
    for m, lam in _grid(cfg):
        w = run.window(m, lam)
        g = hypercube(m)
        for s in cfg.seeds():
            wc = extract_weighted_components(PercolationSample(g, s), w)
            if wc.n == 0:
                t.rows.append([m, lam, s, 0, w.q_lambda] + [math.nan] * 6)
                continue
            wv = WeightVector(wc.weights, w.q_lambda)
            c = check_conditions(wv, float(cfg.budget("eta0")), float(cfg.budget("r0")))
            t.rows.append([m, lam, s, wc.n, wv.q, wv.sigma2, c.sigma3_over_sigma2_cubed,
                           c.q_minus_inv_sigma2, c.max_over_sigma2, c.max_over_sigma2_pow,
                           c.sigma2_pow_r0_over_min])


# ----------------------------------------------------------------------------
# GP distance matrices of the largest component


def hypercube_gp_matrix(g, p: float, seed: int, k: int) -> np.ndarray:
    """k i.i.d. uniform points of the largest component of H_p, distances times V^{-1/3}."""
    sample = PercolationSample(g, seed)
    comp = sample.components(p)[0]
    space = from_component(sample, p, comp, g.V ** (-1.0 / 3.0), g.V ** (-2.0 / 3.0), implicit=True)
    return gp_distance_matrix(space, k, seed)


def er_gp_matrix(n: int, lam: float, seed: int, k: int) -> np.ndarray:
    """Same for G(n, p) in the window at lam, distances times n^{-1/3}.

    Ties for the largest component go to the one holding the smallest vertex.
    """
    i, j = er_edges(n, er_edge_probability(n, lam), generator(seed, STREAM_MISC))
    adj = coo_matrix((np.ones(i.size, dtype=np.int8), (i, j)), shape=(n, n)).tocsr()
    _, lab = connected_components(adj, directed=False)
    counts = np.bincount(lab)
    big = int(np.argmax(counts))  # labels are numbered by smallest vertex, argmax takes the first
    verts = np.flatnonzero(lab == big)
    idx = verts[generator(seed, STREAM_MISC + 16).integers(0, verts.size, k)]
    uniq, inv = np.unique(idx, return_inverse=True)
    d = shortest_path(adj, unweighted=True, directed=False, indices=uniq)
    rows = d[inv.ravel()][:, idx]
    return rows * n ** (-1.0 / 3.0)


@register("gp-vs-er")
def _gp_vs_er(run: _Run) -> None:
    cfg = run.cfg
    k = int(cfg.budget("gp_points"))
    iu = np.triu_indices(k, 1)
    t = run.table("gp", ["m", "lambda", "source", "seed"] + [f"d{a}{b}" for a, b in zip(*iu)])
    for m, lam in _grid(cfg):
        g = hypercube(m)
        p = run.p_c(m, lam)
        A = [hypercube_gp_matrix(g, p, s, k) for s in cfg.seeds()]
        B = [er_gp_matrix(g.V, lam, s, k) for s in cfg.seeds()]
        for s, a in zip(cfg.seeds(), A):
            t.rows.append([m, lam, "hypercube", s] + a[iu].tolist())
        for s, b in zip(cfg.seeds(), B):
            t.rows.append([m, lam, "er", s] + b[iu].tolist())
        if A:
            run.report({"m": m, "lambda": lam},
                       distance_matrix_test(A, B, k, int(cfg.budget("n_perm")), cfg.base_seed,
                                            cfg.budget("alpha")))


# ----------------------------------------------------------------------------
# emission


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    import networkx
    import numba
    import scipy

    return {"percolab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "networkx": networkx.__version__}


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ResultBundle:
    """Run the named experiment and write its CSVs, manifest.json and timing.json."""
    if cfg.experiment not in REGISTRY:
        raise InputError(f"unknown experiment {cfg.experiment!r}; known: {sorted(REGISTRY)}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    t0 = time.perf_counter()
    run = _Run(cfg)
    REGISTRY[cfg.experiment](run)
    files: dict[str, Path] = {}
    if "csv" in cfg.formats:
        for name, tab in run.tables.items():
            files[f"{name}.csv"] = out / f"{name}.csv"
            write_csv(files[f"{name}.csv"], tab.header, tab.rows)
        if run.reports:
            files["reports.csv"] = out / "reports.csv"
            tags = sorted({key for tag, _ in run.reports for key in tag})
            write_csv(files["reports.csv"], tags + REPORT_HEADER,
                      [[tag.get(key, "") for key in tags] + rep.row() for tag, rep in run.reports])
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.canonical(),
        "config_hash": cfg.digest(),
        "versions": versions(),
        "seeds": {"base_seed": cfg.base_seed, "n_seeds": cfg.n_seeds,
                  "replicates": [cfg.base_seed, cfg.base_seed + cfg.n_seeds],
                  "calibration_offset": CALIB_OFFSET, "window_offset": WINDOW_OFFSET,
                  "kappa_offset": KAPPA_OFFSET},
        "p_c_hat": {f"{m},{lam!r}": p for (m, lam), p in sorted(run._pc.items())},
        "files": {name: _sha256(path) for name, path in sorted(files.items())},
        "reports": [{**tag, "statistic": rep.statistic_name, "n_x": rep.n_x, "n_y": rep.n_y,
                     "value": rep.statistic, "p_value": rep.p_value, "n_perm": rep.n_perm,
                     "alpha": rep.alpha, "reject": rep.reject} for tag, rep in run.reports],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_safe) + "\n")
    wall = time.perf_counter() - t0
    (out / "timing.json").write_text(json.dumps({"wall_time_s": wall}) + "\n")
    return ResultBundle(out, files, run.reports, path, wall)
