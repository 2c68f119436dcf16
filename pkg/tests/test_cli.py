import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from semipositone.cli import main, parse_a_range, parse_lambda, UsageError
from semipositone.reports import dumps, load_records

SUPERLINEAR = {"N": 3, "lambda": 0.5, "phi": {"kind": "p-laplacian", "p": 2},
               "reaction": {"kind": "power-shift", "alpha": 2, "params": {"beta": 1}}}
LINEAR = {"N": 3, "lambda": 4, "phi": {"kind": "p-laplacian", "p": 2}, "reaction": {"kind": "linear-shift"}}


@pytest.fixture
def problems(tmp_path):
    paths = {}
    for name, d in (("super", SUPERLINEAR), ("linear", LINEAR)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(d))
        paths[name] = p
    return paths


def run(*argv):
    return main([str(a) for a in argv])


def test_parse_lambda_forms():
    assert parse_lambda("2.5") == [2.5]
    assert parse_lambda("1:3:3") == [1.0, 2.0, 3.0]
    assert parse_lambda("log:0.25:16384:17") == [0.25 * 2**k for k in range(17)]
    assert parse_lambda("1,4,9") == [1.0, 4.0, 9.0]
    for bad in ("x", "1:2", "log:1:2", "-1", "0,1"):
        with pytest.raises(UsageError):
            parse_lambda(bad)


def test_parse_a_range():
    assert parse_a_range("1.5:50") == (1.5, 50.0, None)
    assert parse_a_range("1.5:50:64") == (1.5, 50.0, 64)
    for bad in ("5:3", "0:1", "1:2:4", "a:b"):
        with pytest.raises(UsageError):
            parse_a_range(bad)


def test_validate(problems, capsys):
    assert run("validate", "--problem", problems["super"]) == 0
    assert "reaction.growth" in capsys.readouterr().out


def test_shoot_linear_csv(problems, tmp_path):
    out = tmp_path / "shoot"
    assert run("shoot", "--problem", problems["linear"], "--a", 2, "--out", out, "--format", "csv,json,svg") == 0
    lines = (out / "trajectory.csv").read_text().strip().splitlines()
    assert lines[0] == "r,u,du,I,E"
    last = [float(x) for x in lines[-1].split(",")]
    assert last[0] == 1.0 and last[1] == pytest.approx(1.0 + math.sin(2) / 2, abs=1e-6)
    assert last[4] == pytest.approx(-1.2073, abs=1e-3)
    assert (out / "profile.svg").read_text().startswith("<svg")
    assert json.loads((out / "trajectory.json").read_text())["events"][-1]["kind"] == "reached-boundary"


def test_shoot_constant_columns(problems, tmp_path):
    out = tmp_path / "c"
    assert run("shoot", "--problem", problems["super"], "--a", 1, "--out", out, "--steps", 64) == 0
    rows = [line.split(",") for line in (out / "trajectory.csv").read_text().strip().splitlines()[1:]]
    assert {r[1] for r in rows} == {"1"} and {r[2] for r in rows} == {"0"} and {r[3] for r in rows} == {"0"}
    assert len({r[4] for r in rows}) == 1


def test_malformed_problem(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"N": 3,\n  "lambda": }')
    assert run("shoot", "--problem", bad, "--a", 1) == 1
    assert "bad.json:2:" in capsys.readouterr().err
    assert run("shoot", "--problem", tmp_path / "missing.json", "--a", 1) == 1
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({**SUPERLINEAR, "phi": {"kind": "p-laplacian", "p": 0.5}}))
    assert run("validate", "--problem", wrong) == 1


def test_usage_errors(problems):
    assert run("shoot", "--problem", problems["super"]) == 1
    assert run("shoot", "--problem", problems["super"], "--a", -1) == 1
    assert run("solve", "--problem", problems["super"], "--a-range", "5:3") == 1
    assert run("solve", "--problem", problems["super"], "--c", 2) == 1
    assert run("solve", "--problem", problems["super"], "--lambda", "1,2") == 1
    assert run("sweep", "--problem", problems["super"], "--lambda", "4,2") == 1
    assert run("sweep", "--problem", problems["super"]) == 1
    assert run("shoot", "--problem", problems["super"], "--a", 2, "--format", "pdf") == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1


def test_solve_and_verify_roundtrip(problems, tmp_path):
    out = tmp_path / "solve"
    assert run("solve", "--problem", problems["super"], "--out", out, "--format", "json,csv,svg") == 0
    data = json.loads((out / "solutions.json").read_text())
    assert len(data["records"]) >= 1 and data["records"][0]["positive"]
    assert (out / "solutions.csv").read_text().splitlines()[0] == "lambda,a,residual,positive,r1,r2,E_min"
    assert run("verify", out, "--out", out) == 0
    summary = json.loads((out / "verify.json").read_text())
    assert summary["passed"] and summary["records"] == len(data["records"])
    _, recs = load_records(out / "solutions.json")
    assert recs[0].a == data["records"][0]["a"]


def test_solve_empty_and_verify_vacuous(problems, tmp_path, caplog):
    out = tmp_path / "empty"
    assert run("solve", "--problem", problems["super"], "--lambda", "1e6", "--a-range", f"{math.sqrt(3)}:1e4:256",
               "--out", out) == 0
    assert json.loads((out / "solutions.json").read_text())["records"] == []
    assert run("verify", out / "solutions.json") == 0
    assert "vacuously" in caplog.text


def test_verify_detects_tampering(problems, tmp_path):
    out = tmp_path / "t"
    assert run("solve", "--problem", problems["super"], "--out", out) == 0
    data = json.loads((out / "solutions.json").read_text())
    data["records"][0]["a"] = 1.5
    bad = tmp_path / "tampered.json"
    bad.write_text(dumps(data))
    assert run("verify", bad) == 3
    data["records"][0]["trajectory"]["u"][0] = 1.5
    bad.write_text(dumps(data))
    assert run("verify", bad) == 3
    assert run("verify", tmp_path / "nothing-here.json") == 1


def test_sweep_outputs_and_determinism(problems, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"sweep{k}"
        assert run("sweep", "--problem", problems["super"], "--lambda", "log:1:16:5", "--a-range", "1.0001:200:96",
                   "--out", out) == 0
        outs.append(out)
    for name in ("sweep.json", "branch.csv", "bifurcation.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    data = json.loads((outs[0] / "sweep.json").read_text())
    assert data["lambda0_estimate"] == 8.0
    assert "lambda0" in (outs[0] / "bifurcation.svg").read_text()
    assert run("verify", outs[0]) == 0


def test_single_lambda_sweep(problems, tmp_path):
    out = tmp_path / "one"
    assert run("sweep", "--problem", problems["super"], "--lambda", "2", "--a-range", "1.0001:200:64",
               "--out", out, "--format", "json") == 0
    data = json.loads((out / "sweep.json").read_text())
    assert data["lambda_grid"] == [2.0] and len(data["records"]) == 1


def test_console_script_entry(problems, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "semipositone.cli", "validate", "--problem", str(problems["super"])],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "instance.alpha_window" in proc.stdout
