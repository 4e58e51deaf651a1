import io
import json

import numpy as np
import pytest

from sbalanced import cli, core


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


def split_verdict(text):
    head, marker, tail = text.partition(cli.VERDICT_MARKER + "\n")
    assert marker, "verdict marker missing"
    return head, json.loads(tail.strip())


def test_collinear_unit_masses():
    code, text = run(["collinear", "--masses", "1,1,1"])
    assert code == cli.EXIT_OK
    y = [float(v) for v in text.split("y:")[1].splitlines()[0].split()]
    assert np.allclose(y, [-1 / np.sqrt(2), 0, 1 / np.sqrt(2)], atol=1e-12)
    u = float(text.split("U:")[1].split()[0])
    assert u == pytest.approx(3.5355339, abs=1e-7)


def test_two_bodies_have_no_bifurcations():
    assert run(["collinear", "--masses", "1,1"])[0] == cli.EXIT_OK
    code, text = run(["bifurcations", "--masses", "1,1"])
    assert code == cli.EXIT_OK
    assert "bifurcation s: none" in text


def test_negative_mass_is_a_usage_error(capsys):
    code, _ = run(["collinear", "--masses", "1,-1,1"])
    assert code == cli.EXIT_USAGE
    assert "masses must be positive" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["collinear", "--masses", "1,x,1"],
    ["collinear", "--masses", "1,1,1", "--ordering", "0,0,1"],
    ["reproduce", "no-such-scenario"],
    ["reproduce", "two-big-one-small", "--mu", "1.5"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    assert run(argv)[0] == cli.EXIT_USAGE


def test_numerical_failure_still_writes_partial_branch(tmp_path):
    code, text = run(["follow", "--masses", "1,1,1", "--tol", "1e-17", "--out", str(tmp_path)])
    assert code == cli.EXIT_NUMERICAL
    assert "termination=NewtonFailure" in text
    assert len(cli.read_branch_jsonl(tmp_path / "branch00.jsonl")) >= 2


def test_bifurcations_unit_masses():
    code, text = run(["bifurcations", "--masses", "1,1,1"])
    assert code == cli.EXIT_OK
    values = [float(v) for v in text.split("bifurcation s:")[1].split()]
    assert len(values) == 1 and abs(values[0] - 2.4) <= 1e-6


def test_follow_writes_round_trippable_files(tmp_path):
    code, text = run(["follow", "--masses", "1,1,1", "--out", str(tmp_path), "--s-min", "2.0"])
    assert code == cli.EXIT_OK
    assert "termination=ReachedSMin" in text
    records = cli.read_branch_jsonl(tmp_path / "branch00.jsonl")
    assert len(records) > 10
    m = np.ones(3)
    for rec in records:
        assert set(rec) == {"s", "coords", "index_minus", "index_zero", "index_plus",
                            "residual", "moment_error", "arclength"}
        res = np.max(np.abs(core.balance_residual(np.array(rec["coords"]), m, rec["s"])))
        assert abs(res - rec["residual"]) <= 1e-12
    raw = (tmp_path / "branch00.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "s,x1,y1,x2,y2,x3,y3"
    assert len(lines) == len(records) + 1
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == records[0]["s"] and first[1:] == records[0]["coords"]


def test_reproduce_verdict_block(tmp_path):
    code, text = run(["reproduce", "equal-masses", "--out", str(tmp_path), "--s-min", "2.0"])
    assert code == cli.EXIT_OK
    summary, verdict = split_verdict(text)
    assert "branch00" in summary
    assert verdict["scenario"] == "equal-masses"
    assert verdict["bifurcation_s"] == pytest.approx([2.4], abs=1e-9)
    assert verdict["monotone_s"] and verdict["all_minima"] and verdict["mirror_is_reflection"]
    # stopped early, far from the equilateral endpoint
    assert verdict["endpoint"] == "other"


def test_multistart_command():
    code, text = run(["multistart", "--masses", "1,1,1", "--s", "10", "--starts", "200"])
    assert code == cli.EXIT_OK
    assert "non-collinear configurations without symmetry reduction" in text


def test_scenario_spec_defaults():
    spec = cli.scenario_spec("two-big-one-small")
    assert spec.masses == (1.0, 1.0, 0.01) and spec.probe and spec.mirror
    assert cli.scenario_spec("one-big-two-small", 0.5).masses == (1.0, 0.5, 0.5)
    assert not cli.scenario_spec("equal-masses").probe
