"""Command line interface: exit codes, file outputs, manifests, determinism."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sphere_blowup.cli import main


def read_lines(path):
    return path.read_text().splitlines()


def test_reduce_prints_and_exits_zero(capsys):
    assert main(["reduce", "--eps", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "lambda_*" in out and "0.00114999" in out


def test_reduce_json_output(tmp_path):
    out = tmp_path / "red.json"
    assert main(["reduce", "--eps", "0.01", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["lambda_star"] == pytest.approx(0.0011499923690410025, rel=1e-12)
    assert doc["lambda_1"] < doc["lambda_star"] < doc["lambda_2"]
    manifest = json.loads((tmp_path / "red.json.manifest.json").read_text())
    assert manifest["command"] == "reduce"
    assert manifest["parameters"]["eps"] == 0.01


def test_usage_errors_exit_two(capsys):
    assert main(["reduce", "--eps", "-1"]) == 2
    assert main(["solve", "--rho", "33.6"]) == 2
    assert main(["solve", "--rho", "100.7", "--eps", "0.5"]) == 2
    assert main(["solve"]) == 2
    assert main(["config-opt", "--m", "1"]) == 2
    assert main(["ansatz-eval", "--lambda", "0.05", "--grid", "4"]) == 2
    assert main(["branch", "--rho-start", "33.6", "--rho-end", "33.5",
                 "--steps", "4"]) == 2
    err = capsys.readouterr().err
    assert "error:" in err


def test_numerical_failure_exits_three(capsys):
    # beyond the hump of the stationarity curve no interior maximum exists
    assert main(["reduce", "--eps", "110", "--eps-max", "200"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_config_opt_json_and_manifest(tmp_path):
    out = tmp_path / "opt.json"
    assert main(["config-opt", "--m", "4", "--starts", "6", "--seed", "1",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["m"] == 4
    assert doc["converged"] is True
    assert doc["label"] == "tetrahedron4"
    assert doc["energy"] == pytest.approx(-6.0 * math.log(8.0 / 3.0), abs=1e-10)
    assert len(doc["points"]) == 4
    assert len(doc["start_energies"]) == 6
    assert (tmp_path / "opt.png").exists()
    manifest = json.loads((tmp_path / "opt.json.manifest.json").read_text())
    assert manifest["parameters"]["seed"] == 1
    assert "tool_version" in manifest and "timestamp" in manifest


def test_config_opt_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        assert main(["config-opt", "--m", "4", "--starts", "4", "--seed", "3",
                     "--no-figure", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_ansatz_eval_csv_and_figure(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["ansatz-eval", "--lambda", "0.05", "--grid", "24",
                 "--out", str(out)]) == 0
    lines = read_lines(out)
    assert lines[0] == "theta,phi,w"
    assert len(lines) == 1 + 24 * 48
    row = lines[1].split(",")
    assert len(row) == 3 and all(np.isfinite(float(v)) for v in row)
    assert (tmp_path / "w.png").exists()


def test_ansatz_eval_no_figure(tmp_path):
    out = tmp_path / "w2.csv"
    assert main(["ansatz-eval", "--lambda", "0.05", "--grid", "24",
                 "--no-figure", "--out", str(out)]) == 0
    assert not (tmp_path / "w2.png").exists()


def test_classify_roundtrip(tmp_path):
    opt = tmp_path / "opt.json"
    assert main(["config-opt", "--m", "6", "--starts", "6", "--seed", "0",
                 "--no-figure", "--out", str(opt)]) == 0
    pts = tmp_path / "pts.json"
    pts.write_text(json.dumps({"points": json.loads(opt.read_text())["points"]}))
    cls = tmp_path / "cls.json"
    assert main(["classify", "--in", str(pts), "--out", str(cls)]) == 0
    doc = json.loads(cls.read_text())
    assert doc["label"] == "octahedron6"
    manifest = json.loads((tmp_path / "cls.json.manifest.json").read_text())
    assert "input_hash" in manifest


def test_classify_missing_file(tmp_path):
    assert main(["classify", "--in", str(tmp_path / "nope.json")]) == 2


def test_solve_small_json(tmp_path):
    out = tmp_path / "solve.json"
    assert main(["solve", "--eps", "0.5", "--L", "8", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["converged"] is True
    assert doc["rho"] == pytest.approx(32.0 * math.pi + 0.5, rel=1e-14)
    assert doc["residual_norm"] <= 1e-8
    assert doc["L"] == 8
    assert doc["lam"] > 0.0


def test_branch_small_run(tmp_path):
    out = tmp_path / "branch.csv"
    assert main(["branch", "--rho-start", "100.7", "--rho-end", "100.6",
                 "--steps", "2", "--L", "8", "--out", str(out)]) == 0
    lines = read_lines(out)
    assert lines[0] == "rho,u_peak,u_offpeak,lambda_est,eps_ratio,residual"
    assert len(lines) >= 2
    first = dict(zip(lines[0].split(","), map(float, lines[1].split(","))))
    assert first["rho"] == pytest.approx(100.7)
    assert first["residual"] <= 1e-8
    assert (tmp_path / "branch.png").exists()


def test_residual_check_csv(tmp_path, capsys):
    out = tmp_path / "res.csv"
    assert main(["residual-check", "--lambda", "0.1", "--grid", "24",
                 "--no-figure", "--out", str(out)]) == 0
    lines = read_lines(out)
    assert lines[0] == "theta,phi,s"
    assert len(lines) == 1 + 24 * 48
    assert "max|S|" in capsys.readouterr().out


def test_energy_check_csv(tmp_path):
    out = tmp_path / "en.csv"
    assert main(["energy-check", "--lambda-list", "0.1", "--no-figure",
                 "--out", str(out)]) == 0
    lines = read_lines(out)
    assert lines[0] == ("lambda,eps,j_measured,j_expansion,"
                        "remainder,remainder_over_lambda2")
    assert len(lines) == 2
    vals = dict(zip(lines[0].split(","), map(float, lines[1].split(","))))
    assert vals["lambda"] == 0.1
    assert vals["remainder"] == vals["j_measured"] - vals["j_expansion"]


def test_console_entry_point(tmp_path):
    # one subprocess check that the installed script and the module agree
    res = subprocess.run(
        [sys.executable, "-m", "sphere_blowup.cli", "reduce", "--eps", "0.01"],
        capture_output=True, text=True, timeout=300)
    assert res.returncode == 0
    assert "0.0011499923690410025" in res.stdout
