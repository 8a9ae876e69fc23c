"""Command-line entry point ``percolab``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .calibration import Z_CI, calibrate_pc, calibrate_window, derive_window, kappa_auto
from .component_graphs import (MATRIX_CAP, bad_pair_count, build_pair, connection_matrices,
                               coupling_l2, discrepancy_mass, extract_weighted_components,
                               full_component_graph, girth_scan, metric_comparison)
from .errors import InputError
from .harness import ExperimentConfig, run_experiment
from .harness.experiments import _cell, write_csv
from .limit_oracle import er_component_sizes, er_edge_probability, sample_excursions
from .mmspace import ghp_bruteforce, gp_distance_matrix, hausdorff, prokhorov, read_space
from .multiplicative import WeightVector, sample_direct, sample_exploration
from .percolation import PercolationSample, tail_and_l4_stats
from .substrate import hypercube, mixing_profile


def _emit(args, header, rows) -> None:
    if args.out:
        write_csv(Path(args.out), header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows([_cell(x) for x in r] for r in rows)


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _kappa(args, lam: float, V: int) -> tuple[float, float]:
    if args.kappa == "auto":
        return kappa_auto(lam, V)
    try:
        return float(args.kappa), 0.0
    except ValueError:
        raise InputError(f"--kappa must be a number or 'auto', got {args.kappa!r}") from None


def cmd_nbrw(args) -> None:
    g = hypercube(args.m)
    rows = mixing_profile(g, args.xi, args.tmax)
    if args.t is not None:
        if not 0 <= args.t <= args.tmax:
            raise InputError("--t must lie in [0, tmax]")
        rows = [rows[args.t]]
    _emit(args, ["t", "max_violation", "mixed"], rows)


def cmd_percolate(args) -> None:
    g = hypercube(args.m)
    if args.p is not None:
        p = args.p
    elif args.lam is not None:
        k, se = _kappa(args, args.lam, g.V)
        p = calibrate_pc(g, args.lam, k, args.budget, args.seed + 100_000_000, kappa_se=se).p_c_hat
        print(f"p_c_hat = {p!r}", file=sys.stderr)
    else:
        raise InputError("give --p or --lambda")
    rows = []
    for s in range(args.seed, args.seed + args.seeds):
        sample = PercolationSample(g, s)
        if args.stats == "l4":
            st = sample.stats(p, diameters=True)
            for k in range(1, args.top + 1):
                rows.append([s, k, *tail_and_l4_stats(st, k)])
            continue
        st = sample.stats(p, diameters=args.stats == "diam")
        for r in range(min(args.top, st.sizes.size)):
            row = [s, r + 1, st.sizes[r]]
            if args.stats == "diam":
                row.append(st.diameters[r])
            rows.append(row)
    header = {"sizes": ["seed", "rank", "size"], "diam": ["seed", "rank", "size", "diameter"],
              "l4": ["seed", "k", "mass_tail", "diam_tail", "bound_used"]}[args.stats]
    _emit(args, header, rows)


def cmd_oracle(args) -> None:
    rows = []
    vals = []
    for s in range(args.seed, args.seed + args.samples):
        if args.mode == "brownian":
            v = sample_excursions(args.lam, T=args.T, h=args.h, seed=s).lengths
        else:
            n = args.n
            v = er_component_sizes(n, er_edge_probability(n, args.lam), s) / n ** (2.0 / 3.0)
        vals.append(float(np.sum(v**2)))
        rows.extend([s, r + 1, x] for r, x in enumerate(v[:args.top]))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    print(f"kappa_hat = {mean!r} +- {se!r}", file=sys.stderr)
    _emit(args, ["seed", "rank", "value"], rows)


def cmd_calibrate(args) -> None:
    g = hypercube(args.m)
    k, se = _kappa(args, args.lam, g.V)
    w, est = calibrate_window(g, args.lam, args.budget, kappa=k, kappa_se=se, base_seed=args.seed)
    text = json.dumps(w.to_dict(), indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    if est.status != "ok":
        print(f"warning: calibration status {est.status}", file=sys.stderr)


def _weights(spec: str, seed: int) -> np.ndarray:
    """A file of weights (one per line) or ``er:N`` / ``const:N:W`` / ``pareto:N:A``."""
    if ":" in spec and not Path(spec).exists():
        kind, *rest = spec.split(":")
        try:
            if kind == "er":
                n = int(rest[0])
                return np.full(n, n ** (-2.0 / 3.0))
            if kind == "const":
                return np.full(int(rest[0]), float(rest[1]))
            if kind == "pareto":
                n, a = int(rest[0]), float(rest[1])
                rng = np.random.default_rng(seed)
                return (1.0 + rng.pareto(a, n)) * n ** (-2.0 / 3.0)
        except (IndexError, ValueError):
            pass
        raise InputError(f"bad synthetic weight spec {spec!r}")
    try:
        w = np.loadtxt(spec, ndmin=1)
    except OSError as exc:
        raise InputError(f"cannot read weights: {exc}") from None
    return w


def cmd_multgraph(args) -> None:
    wv = WeightVector(_weights(args.weights, args.seed), args.q)
    rows = []
    for s in range(args.seed, args.seed + args.samples):
        if args.mode == "direct":
            cw = sample_direct(wv, s).weights
        else:
            cw = sample_exploration(wv, s).weights_sorted
        rows.extend([s, r + 1, x] for r, x in enumerate(cw[:args.top]))
    _emit(args, ["seed", "rank", "weight"], rows)


def cmd_compgraph(args) -> None:
    g = hypercube(args.m)
    k, se = _kappa(args, args.lam, g.V)
    kci = (k - Z_CI * se, k + Z_CI * se)
    if args.p_c is not None:
        w = derive_window(g, args.lam, args.p_c, args.budget, kappa_hat=k, kappa_ci=kci)
    else:
        w, _ = calibrate_window(g, args.lam, args.budget, kappa=k, kappa_se=se, base_seed=100_000_000)
    rows = []
    for s in range(args.seed, args.seed + args.seeds):
        wc = extract_weighted_components(PercolationSample(g, s), w)
        if args.emit == "deltas":
            pair = build_pair(wc, w, s)
            rows.extend([s, int(a), int(b), int(d), x, y]
                        for a, b, d, x, y in zip(pair.pa, pair.pb, pair.delta, pair.p_ab, pair.q_ab))
        elif args.emit == "discrepancy":
            pair = build_pair(wc, w, s)
            rows.append([s, wc.n, discrepancy_mass(pair), coupling_l2(pair)])
        elif args.emit == "matrices":
            for cm in connection_matrices(wc.restrict(MATRIX_CAP), w, args.n_mc, seed=s):
                rows.append([s, cm.name, cm.norm])
        elif args.emit == "metric":
            mr = metric_comparison(wc, w, 1, args.pairs, seed=s)
            rows.extend([s, i, mr.d_box[i], mr.d_comp[i], mr.outside[i], mr.same_ps_comp[i]]
                        for i in range(mr.d_box.size))
        elif args.emit == "girth":
            cg = full_component_graph(wc, w)
            gi = girth_scan(cg, args.tau, g.V)
            rows.append([s, args.tau, gi, gi * w.chi_ps_hat / g.V ** (1.0 / 3.0)])
        else:
            rows.append([s, w.p_c_prime, bad_pair_count(wc, w.p_c_prime)])
    header = {
        "deltas": ["seed", "A", "B", "delta", "p_AB", "q_AB"],
        "discrepancy": ["seed", "n", "discrepancy", "coupling_l2"],
        "matrices": ["seed", "matrix", "frobenius"],
        "metric": ["seed", "pair", "d_box", "d_comp", "outside", "same_ps_comp"],
        "girth": ["seed", "tau", "girth", "girth_scaled"],
        "badpairs": ["seed", "p", "bad_pairs"],
    }[args.emit]
    _emit(args, header, rows)


def cmd_mmspace(args) -> None:
    X = read_space(args.inp)
    if args.op == "hausdorff":
        if args.a is None or args.b is None:
            raise InputError("hausdorff needs --a and --b index lists")
        if X.implicit:
            raise InputError("hausdorff needs an explicit space")
        _emit(args, ["op", "value"], [["hausdorff", hausdorff(X.d, _ints(args.a), _ints(args.b))]])
    elif args.op == "prokhorov":
        if args.nu is not None:
            nu = np.array(_floats(args.nu))
        elif args.in2 is not None:
            Y = read_space(args.in2)
            if Y.k != X.k or not np.allclose(Y.d, X.d):
                raise InputError("prokhorov needs both measures on the same metric")
            nu = Y.mass
        else:
            raise InputError("prokhorov needs --nu or --in2")
        _emit(args, ["op", "value"], [["prokhorov", prokhorov(X.d, X.mass, nu)]])
    elif args.op == "gp-matrix":
        k = args.points
        rows = []
        for s in range(args.seed, args.seed + args.samples):
            d = gp_distance_matrix(X, k, s)
            rows.extend([s, i, j, d[i, j]] for i in range(k) for j in range(i + 1, k))
        _emit(args, ["seed", "i", "j", "distance"], rows)
    else:
        if args.in2 is None:
            raise InputError("ghp needs --in2")
        _emit(args, ["op", "value"], [["ghp", ghp_bruteforce(X, read_space(args.in2))]])


def cmd_experiment(args) -> None:
    text = Path(args.config).read_text() if args.config else ""
    cfg_text = text
    if not any(ln.split("=")[0].strip() == "experiment" for ln in text.splitlines()):
        cfg_text = f"experiment = {args.name}\n" + text
    cfg = ExperimentConfig.from_text(cfg_text)
    if cfg.experiment != args.name:
        raise InputError(f"config names experiment {cfg.experiment!r}, command line {args.name!r}")
    if args.seed_given:
        cfg.base_seed = args.seed
    bundle = run_experiment(cfg, args.out)
    for tag, rep in bundle.reports:
        verdict = "reject" if rep.reject else "no rejection"
        print(f"{tag}: {rep.statistic_name} = {rep.statistic:.4g}, p = {rep.p_value:.4g} ({verdict})")
    print(f"wrote {bundle.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="percolab", description=__doc__)
    ap.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def out(p):
        p.add_argument("--out", help="CSV path (stdout if omitted)")

    def window_flags(p):
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--kappa", default="auto", help="kappa-hat value or 'auto'")
        p.add_argument("--budget", type=int, default=2000, help="Monte Carlo seeds for calibration")

    p = sub.add_parser("nbrw", help="non-backtracking walk mixing profile on the hypercube")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--t", type=int, default=None, help="report only this step")
    p.add_argument("--xi", type=float, default=0.5)
    p.add_argument("--tmax", type=int, default=50)
    out(p)
    p.set_defaults(func=cmd_nbrw)

    p = sub.add_parser("percolate", help="component statistics of H_p")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=float, default=None)
    window_flags(p)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--stats", choices=["sizes", "diam", "l4"], default="sizes")
    p.add_argument("--top", type=int, default=10)
    out(p)
    p.set_defaults(func=cmd_percolate)

    p = sub.add_parser("oracle", help="Brownian or Erdos-Renyi limit samples")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mode", choices=["brownian", "er"], default="brownian")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--top", type=int, default=5)
    out(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("calibrate", help="calibrate p_c and the window parameters")
    p.add_argument("--m", type=int, required=True)
    window_flags(p)
    p.add_argument("--json", help="write the WindowParams record here (stdout if omitted)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("multgraph", help="multiplicative random graph samples")
    p.add_argument("--weights", required=True, help="weight file or er:N, const:N:W, pareto:N:A")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--mode", choices=["direct", "exploration"], default="direct")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--top", type=int, default=10)
    out(p)
    p.set_defaults(func=cmd_multgraph)

    p = sub.add_parser("compgraph", help="component graphs over H_{p_s}")
    p.add_argument("--m", type=int, required=True)
    window_flags(p)
    p.add_argument("--p-c", dest="p_c", type=float, default=None, help="skip calibration")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--emit", choices=["deltas", "discrepancy", "matrices", "metric", "girth", "badpairs"],
                   default="discrepancy")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--n-mc", dest="n_mc", type=int, default=20)
    p.add_argument("--pairs", type=int, default=100)
    out(p)
    p.set_defaults(func=cmd_compgraph)

    p = sub.add_parser("mmspace", help="distances between finite metric measure spaces")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--in2", default=None, help="second space (ghp, or prokhorov's second measure)")
    p.add_argument("--op", choices=["hausdorff", "prokhorov", "gp-matrix", "ghp"], required=True)
    p.add_argument("--points", type=int, default=4)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--a", default=None, help="comma-separated point indices")
    p.add_argument("--b", default=None)
    p.add_argument("--nu", default=None, help="comma-separated second measure")
    out(p)
    p.set_defaults(func=cmd_mmspace)

    p = sub.add_parser("experiment", help="run a registered experiment")
    p.add_argument("name")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="output directory (config out_dir if omitted)")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if getattr(args, "lam", None) is None and args.cmd in ("calibrate", "compgraph"):
        args.lam = 0.0
    try:
        args.func(args)
    except InputError as exc:
        print(f"percolab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
