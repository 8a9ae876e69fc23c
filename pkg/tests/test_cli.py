import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from percolab.cli import main
from percolab.mmspace import FiniteMMSpace, write_space


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


def test_nbrw(capsys):
    assert main(["nbrw", "--m", "8", "--tmax", "30"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert len(rows) == 32
    assert main(["nbrw", "--m", "8", "--t", "5"]) == 0
    assert len(rows_of(capsys.readouterr().out)) == 2


def test_percolate_sizes(capsys, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["--seed", "4", "percolate", "--m", "8", "--p", "0.2", "--seeds", "3", "--out", str(out)]) == 0
    rows = rows_of(out.read_text())
    assert rows[0] == ["seed", "rank", "size"]
    assert {r[0] for r in rows[1:]} == {"4", "5", "6"}
    assert main(["--seed", "4", "percolate", "--m", "8", "--p", "0.2", "--seeds", "3"]) == 0
    assert capsys.readouterr().out == out.read_text()
    assert main(["percolate", "--m", "6", "--p", "0.3", "--stats", "diam"]) == 0
    assert main(["percolate", "--m", "6", "--p", "0.3", "--stats", "l4"]) == 0


def test_percolate_needs_p_or_lambda(capsys):
    assert main(["percolate", "--m", "6"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["percolate", "--m", "6", "--p", "1.5"]) == 2


def test_oracle(capsys):
    assert main(["oracle", "--lambda", "0", "--samples", "3", "--h", "1e-3"]) == 0
    captured = capsys.readouterr()
    rows = rows_of(captured.out)
    assert {r[0] for r in rows[1:]} == {"0", "1", "2"} and all(int(r[1]) <= 5 for r in rows[1:])
    assert "kappa" in captured.err
    assert main(["oracle", "--mode", "er", "--n", "1000", "--samples", "3"]) == 0


def test_calibrate_json(tmp_path):
    path = tmp_path / "w.json"
    assert main(["calibrate", "--m", "8", "--kappa", "1.7", "--budget", "1000", "--json", str(path)]) == 0
    d = json.loads(path.read_text())
    for key in ("m", "V", "lambda", "alpha_m", "p_c_hat", "p_c_hat_ci", "p_s", "M_s", "chi_ps_hat",
                "chi_ps_hat_ci", "q_lambda", "p_c_prime", "kappa_hat", "kappa_hat_ci"):
        assert key in d
    assert d["m"] == 8 and d["V"] == 256


def test_calibrate_rejects_small_budget(capsys):
    assert main(["calibrate", "--m", "8", "--kappa", "1.7", "--budget", "10"]) == 2


def test_multgraph(capsys, tmp_path):
    assert main(["multgraph", "--weights", "er:500", "--q", "7.9", "--samples", "2"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert {r[0] for r in rows[1:]} == {"0", "1"} and len(rows) <= 21
    wfile = tmp_path / "w.txt"
    wfile.write_text("1.0\n2.0\n0.5\n")
    assert main(["multgraph", "--weights", str(wfile), "--q", "1", "--mode", "exploration"]) == 0
    assert main(["multgraph", "--weights", "pareto:200:3", "--q", "1"]) == 0
    assert main(["multgraph", "--weights", "bogus:3", "--q", "1"]) == 2


@pytest.mark.parametrize("emit", ["deltas", "discrepancy", "matrices", "metric", "girth", "badpairs"])
def test_compgraph(capsys, emit):
    assert main(["compgraph", "--m", "9", "--p-c", "0.13", "--kappa", "1.7", "--budget", "1000",
                 "--emit", emit, "--n-mc", "3", "--pairs", "5", "--seeds", "2"]) == 0
    assert len(rows_of(capsys.readouterr().out)) >= 2


def test_mmspace(capsys, tmp_path):
    X = FiniteMMSpace(np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], float), [0.5, 0.25, 0.25])
    Y = FiniteMMSpace(np.array([[0.0]]), [1.0])
    px, py = tmp_path / "x.txt", tmp_path / "y.txt"
    write_space(px, X)
    write_space(py, Y)
    assert main(["mmspace", "--in", str(px), "--op", "hausdorff", "--a", "0", "--b", "2"]) == 0
    assert float(rows_of(capsys.readouterr().out)[1][-1]) == 2.0
    assert main(["mmspace", "--in", str(px), "--op", "ghp", "--in2", str(py)]) == 0
    assert main(["mmspace", "--in", str(px), "--op", "prokhorov", "--nu", "0,0,1"]) == 0
    assert main(["mmspace", "--in", str(px), "--op", "gp-matrix", "--points", "3", "--samples", "2"]) == 0
    capsys.readouterr()
    assert main(["mmspace", "--in", str(tmp_path / "missing.txt"), "--op", "hausdorff"]) == 2


def test_experiment_command(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("m = 8\nseeds = 4\np_c = 0.15\nkappa = 1.7\nn_perm = 99\ncalib_budget = 200\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "sizes-vs-er", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["experiment", "sizes-vs-er", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "sizes.csv").read_bytes() == (b / "sizes.csv").read_bytes()
    c = tmp_path / "c"
    assert main(["--seed", "9", "experiment", "sizes-vs-er", "--config", str(cfg), "--out", str(c)]) == 0
    assert json.loads((c / "manifest.json").read_text())["seeds"]["base_seed"] == 9
    assert main(["experiment", "nope", "--out", str(tmp_path / "d")]) == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "percolab.cli", "nbrw", "--m", "4", "--t", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("\n") == 2
