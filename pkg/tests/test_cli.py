import json
import subprocess
import sys

import pytest

from micocert import cli

from instances import example_certificate, example_json


@pytest.fixture
def files(tmp_path):
    prob = tmp_path / "example.json"
    prob.write_text(json.dumps(example_json()))
    cert = tmp_path / "cert.json"
    cert.write_text(json.dumps(example_certificate().to_json()))
    return tmp_path, prob, cert


def run(argv, capsys):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_hand_certificate(files, capsys):
    _, prob, cert = files
    code, out, err = run(["verify", "-p", prob, "-c", cert], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"] == "Valid"
    assert rep["tolerances"]["tau_feas"] == 1e-7
    for label in ["(a)", "(b)", "(c)", "(d)", "(e)"]:
        assert label in err


def test_verify_tampered_multiplier(files, capsys):
    tmp, prob, cert = files
    obj = json.loads(cert.read_text())
    obj["points"][1]["u"] = [0, 0, 0]
    bad = tmp / "bad.json"
    bad.write_text(json.dumps(obj))
    code, out, err = run(["verify", "-p", prob, "-c", bad], capsys)
    assert code == 1
    rep = json.loads(out)
    assert rep["verdict"] == "Invalid"
    assert any(c["label"].startswith("(c)") and not c["passed"] for c in rep["checks"])


def test_brute(files, capsys):
    _, prob, _ = files
    code, out, _ = run(["brute", "-p", prob], capsys)
    res = json.loads(out)
    assert code == 0 and res["value"] == pytest.approx(1.0) and res["argmin"] == [0.0, 0.0]


def test_construct_then_dual(files, capsys):
    tmp, prob, _ = files
    made = tmp / "made.json"
    code, _, _ = run(["construct", "-p", prob, "-o", made, "--report", tmp / "rep.json"], capsys)
    assert code == 0
    assert json.loads((tmp / "rep.json").read_text())["verdict"] == "Valid"
    code, out, _ = run(["dual", "-p", prob, "-c", made], capsys)
    dp = json.loads(out)
    assert code == 0 and dp["alpha"] == pytest.approx(1.0) and dp["verification"]["holds"]
    (tmp / "dual.json").write_text(out)
    code, out, _ = run(["dual", "-p", prob, "-D", tmp / "dual.json"], capsys)
    assert code == 0


def test_dual_bound(files, capsys):
    tmp, prob, _ = files
    poly = tmp / "poly.json"
    poly.write_text(json.dumps({"halfspaces": [
        {"normal": [-1, -1], "offset": 0}, {"normal": [1, 0], "offset": 1},
        {"normal": [0, 1], "offset": 1}]}))
    mult = tmp / "U.json"
    mult.write_text(json.dumps([[0, 0], [2, 0], [0, 2]]))
    code, out, _ = run(["dual-bound", "-p", prob, "--polyhedron", poly, "--multipliers", mult], capsys)
    assert code == 0 and json.loads(out)["alpha"] == pytest.approx(1.0, abs=1e-6)


def test_slater_and_project(files, capsys):
    _, prob, _ = files
    code, out, _ = run(["slater", "-p", prob], capsys)
    assert code == 0 and json.loads(out)["holds"]
    code, out, _ = run(["project", "-p", prob, "--point", "[1, 1]"], capsys)
    assert code == 0 and json.loads(out)["holds"]


def test_usage_errors_exit_3(files, capsys):
    tmp, prob, cert = files
    code, _, err = run(["verify", "-p", tmp / "missing.json", "-c", cert], capsys)
    assert code == 3 and err.count("\n") == 1
    code, _, _ = run(["verify", "-p", prob], capsys)
    assert code == 3
    code, _, _ = run(["construct", "-p", prob, "--rational"], capsys)
    assert code == 3
    code, _, _ = run(["frobnicate"], capsys)
    assert code == 3
    code, _, _ = run(["verify", "-p", prob, "-c", cert, "--tol-feas", "-1"], capsys)
    assert code == 3


def test_rational_mode_on_affine_problem(tmp_path, capsys):
    prob = tmp_path / "lp.json"
    prob.write_text(json.dumps({"n": 1, "d": 0, "objective": {"affine": {"a": [-1], "b": 0}},
                                "constraints": [{"affine": {"a": [2], "b": -3}}],
                                "box": {"lo": [-5], "hi": [5]}}))
    made = tmp_path / "c.json"
    assert cli.run(["construct", "-p", str(prob), "-o", str(made)]) == 0
    assert cli.run(["verify", "-p", str(prob), "-c", str(made), "--rational"]) == 0
    code = cli.run(["dual", "-p", str(prob), "-c", str(made), "--rational"])
    out, _ = capsys.readouterr()
    assert code == 0


def test_reports_are_byte_identical(files, tmp_path):
    _, prob, cert = files
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        cli.run(["verify", "-p", str(prob), "-c", str(cert), "--seed", "3", "-o", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(files):
    _, prob, _ = files
    proc = subprocess.run([sys.executable, "-m", "micocert", "brute", "-p", str(prob)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(1.0)
