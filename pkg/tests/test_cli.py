import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import CONFIG_DIR

from penpath import cli


def write_csv(path, x, y):
    p = x.shape[1]
    header = "y," + ",".join(f"x{j}" for j in range(1, p + 1))
    np.savetxt(path, np.column_stack([y, x]), delimiter=",", header=header, comments="")
    return str(path)


@pytest.fixture
def toy_csv(tmp_path):
    return write_csv(tmp_path / "toy.csv", np.ones((4, 1)), np.ones(4))


def read_path(out):
    return np.loadtxt(out / "path.csv", delimiter=",", skiprows=1, ndmin=2)


def test_exact_lasso_toy(toy_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["path", "--data", toy_csv, "--contrast", "ls", "--penalty", "l1", "--exact", "--out", str(out)]) == 0
    table = read_path(out)
    row = table[table[:, 0] == 2.0]
    assert row[0, 1] == 0.5
    assert json.loads((out / "breakpoints.json").read_text()) == [4.0]


def test_grid_paths_for_each_solver(toy_csv, tmp_path):
    for penalty, contrast in (("l1", "ls"), ("l2", "ls"), ("l1", "lad"), ("l2", "lad"), ("l0", "ls")):
        out = tmp_path / f"{penalty}_{contrast}"
        args = ["path", "--data", toy_csv, "--contrast", contrast, "--penalty", penalty, "--tmax", "3", "--tgrid", "4"]
        assert cli.main(args + ["--out", str(out)]) == 0
        assert read_path(out).shape == (4, 5)


def test_exact_l0_path(toy_csv, tmp_path):
    out = tmp_path / "l0"
    assert cli.main(["path", "--data", toy_csv, "--penalty", "l0", "--exact", "--tmax", "6", "--out", str(out)]) == 0
    table = read_path(out)
    assert table[:, 0].tolist() == [0.0, 2.0, 4.0, 5.0, 6.0]
    assert table[:, 1].tolist() == [1.0, 1.0, 0.0, 0.0, 0.0]


def test_path_usage_errors(toy_csv, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["path", "--data", str(tmp_path / "missing.csv"), "--out", out]) == 1
    assert "not found" in capsys.readouterr().err
    assert cli.main(["path", "--data", toy_csv, "--penalty", "l3", "--tmax", "1", "--out", out]) == 1
    assert cli.main(["path", "--data", toy_csv, "--penalty", "lq:0.5", "--tmax", "1", "--out", out]) == 1
    assert cli.main(["path", "--data", toy_csv, "--contrast", "lad", "--exact", "--out", out]) == 1
    assert cli.main(["path", "--data", toy_csv, "--tgrid", "5", "--out", out]) == 1


def test_l0_cost_guard_exit_code(tmp_path, capsys):
    gen = np.random.default_rng(0)
    data = write_csv(tmp_path / "wide.csv", gen.standard_normal((40, 16)), gen.standard_normal(40))
    assert cli.main(["path", "--data", data, "--penalty", "l0", "--tmax", "1", "--out", str(tmp_path / "o")]) == 2
    assert "2^16" in capsys.readouterr().err


def test_separable_logistic_exit_code(tmp_path):
    data = write_csv(tmp_path / "sep.csv", np.array([[1.0], [2.0], [-1.0], [-2.0]]), np.array([1.0, 1.0, 0.0, 0.0]))
    args = ["path", "--data", data, "--contrast", "logistic", "--tmax", "1", "--tgrid", "3", "--out", str(tmp_path / "o")]
    assert cli.main(args) == 2


def test_limit_deterministic(tmp_path):
    args = ["limit", "--beta", "0", "--cov", "identity:1", "--gamma", "1", "--draws", "1", "--seed", "7"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "limit_draws.csv").read_text()
    assert a == (tmp_path / "b" / "limit_draws.csv").read_text()
    assert a.splitlines()[0] == "draw_id,t,u_1,zero_mask_1"


def test_limit_errors(tmp_path):
    out = ["--out", str(tmp_path / "o")]
    base = ["limit", "--beta", "0", "--cov", "identity:1", "--gamma", "1"]
    assert cli.main(base + ["--draws", "0"] + out) == 1
    assert cli.main(["limit", "--beta", "0,0,0,0", "--cov", "identity:4", "--gamma", "0.5", "--draws", "1"] + out) == 2
    cov = tmp_path / "cov.csv"
    cov.write_text("1,2\n2,1\n")
    assert cli.main(["limit", "--beta", "0,0", "--cov", str(cov), "--gamma", "1", "--draws", "1"] + out) == 2
    assert cli.main(["limit", "--beta", "0,0", "--cov", "identity:3", "--gamma", "1", "--draws", "1"] + out) == 1
    assert cli.main(["limit", "--beta", "a", "--cov", "identity:1", "--gamma", "1", "--draws", "1"] + out) == 1


def test_limit_cov_file(tmp_path):
    cov = tmp_path / "cov.csv"
    cov.write_text("1,0.5\n0.5,1\n")
    out = tmp_path / "o"
    args = ["limit", "--beta", "1,0", "--cov", str(cov), "--gamma", "0", "--draws", "3", "--tgrid", "5", "--out", str(out)]
    assert cli.main(args) == 0
    assert len((out / "limit_draws.csv").read_text().splitlines()) == 1 + 3 * 5


def test_mc_config_error(tmp_path, capsys):
    doc = json.loads((CONFIG_DIR / "lasso_consistency.json").read_text())
    doc["replicates"] = 10
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    assert cli.main(["mc", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "config error at /replicates" in capsys.readouterr().err


def test_mc_statistical_failure_exit_code(tmp_path):
    doc = {
        "model": {"beta": [1.0]},
        "contrast": "ls",
        "gamma": 1,
        "tgrid": {"t_max": 2.0, "count": 3},
        "n_values": [20, 40],
        "replicates": 50,
        "seed": 1,
        "experiments": ["consistency"],
        "thresholds": {"rate_ratio_band": [0.0, 1e-9]},
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "o"
    assert cli.main(["mc", "--config", str(cfg), "--out", str(out)]) == 3
    assert (out / "report.json").is_file() and (out / "consistency.csv").is_file()


def test_check_suites(capsys):
    assert cli.main(["check", "--suite", "lemma1"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] and list(summary["suites"]) == ["lemma1"]
    assert cli.main(["check", "--suite", "nosuchsuite"]) == 1
    err = capsys.readouterr().err
    assert "nosuchsuite" in err and "lemma1" in err


def test_parser_errors():
    assert cli.main([]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["path"]) == 1
    assert cli.main(["--help"]) == 0


def test_module_entry_point(toy_csv, tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run(
        [sys.executable, "-m", "penpath.cli", "path", "--data", toy_csv, "--exact", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "path.csv").is_file()
