import json
import subprocess
import sys
from pathlib import Path

import pytest

from nonatomic_eq.cli import RunConfig, UsageError, main

ROOT = Path(__file__).resolve().parents[1]
SAMPLES = ROOT / "samples"


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_alnajjar_example_reports_threshold(capsys):
    code, out, _ = run(["examples", "alnajjar", "--eps", "0.5", "--format", "json"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == "nonatomic-eq/report/1" and rep["kind"] == "examples"
    assert float(rep["sceThreshold"]["value"]) == pytest.approx(0.5 / 2**0.5, abs=1e-15)
    assert rep["sceThreshold"]["largestGridDensity"] == "7/20"
    assert rep["nonexistence"]["allInfeasible"] is True


@pytest.mark.parametrize("name", ["kpqs", "kqrs-hat"])
def test_other_examples_pass(name, capsys, tmp_path):
    code, _, _ = run(["examples", name, "--report", tmp_path / "r.json"], capsys)
    assert code == 0
    assert json.loads((tmp_path / "r.json").read_text())["verdict"] == "pass"


def test_verify_nash_on_symmetric_split(capsys):
    code, out, _ = run(["verify", "nash", SAMPLES / "congestion.json", SAMPLES / "congestion_profile.json",
                        "--eps", "0"], capsys)
    assert code == 0 and out.startswith("verdict: pass")


def test_verify_fail_exits_one(capsys, tmp_path):
    (tmp_path / "p.json").write_text('{"base": [1, 0]}')
    code, out, _ = run(["verify", "nash", SAMPLES / "congestion.json", tmp_path / "p.json", "--eps", "0.5"], capsys)
    assert code == 1 and out.startswith("verdict: fail")


def test_tail_verify(capsys):
    args = ["verify", "sce", SAMPLES / "kpqs.json", SAMPLES / "kpqs_profile.json", SAMPLES / "kpqs_beliefs.json"]
    assert run(args + ["--eps", "0.1"], capsys)[0] == 0
    assert run(args + ["--eps", "0.05"], capsys)[0] == 1


@pytest.mark.parametrize("args", [
    ["solve", "estimated", SAMPLES / "congestion.json", "--eps", "-1"],
    ["solve", "estimated", SAMPLES / "congestion.json", "--eps", "0.05", "--grid", "2"],
    ["solve", "estimated", SAMPLES / "congestion.json", "--eps", "0.05", "--tol", "0"],
    ["solve", "rationalizable", SAMPLES / "congestion.json"],
    ["verify", "sce", SAMPLES / "congestion.json", SAMPLES / "congestion_profile.json", "--eps", "0.1"],
    ["verify", "pce", SAMPLES / "congestion.json", SAMPLES / "congestion_profile.json",
     SAMPLES / "kpqs_beliefs.json", "--eps", "0.1"],
    ["examples", "kpqs", "--eps", "2"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_two(args, capsys):
    assert run(args, capsys)[0] == 2


def test_malformed_game_file(capsys, tmp_path):
    (tmp_path / "g.json").write_text('{"actions": 2,\n "cover": [}')
    code, _, err = run(["check", "grounding", tmp_path / "g.json"], capsys)
    assert code == 2 and "line 2 column" in err
    data = json.loads((SAMPLES / "congestion.json").read_text())
    data["cohorts"][0]["mass"] = "3/4"
    (tmp_path / "g.json").write_text(json.dumps(data))
    code, _, err = run(["check", "grounding", tmp_path / "g.json"], capsys)
    assert code == 2 and "error:" in err


def test_not_found_exit_three(capsys, monkeypatch):
    from nonatomic_eq import cli
    from nonatomic_eq.solver import NotFoundError

    def fail(*args, **kwargs):
        raise NotFoundError("nothing within tol", 0.3)

    monkeypatch.setattr(cli, "solve_estimated", fail)
    code, _, err = run(["solve", "estimated", SAMPLES / "congestion.json", "--eps", "0.05"], capsys)
    assert code == 3 and "not found" in err


def test_solve_is_deterministic_and_round_trips(capsys, tmp_path):
    args = ["solve", "estimated", SAMPLES / "two_groups.json", "--eps", "0.05", "--seed", "7", "--format", "json",
            "--profile-out", tmp_path / "p.json", "--beliefs-out", tmp_path / "b.json"]
    first = run(args + ["--output", tmp_path / "a.json"], capsys)[0]
    second = run(args + ["--output", tmp_path / "b_.json"], capsys)[0]
    assert first == second == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b_.json").read_bytes()
    solved = json.loads((tmp_path / "a.json").read_text())
    code, out, _ = run(["verify", "estimated", SAMPLES / "two_groups.json", tmp_path / "p.json", tmp_path / "b.json",
                        "--eps", "0.05", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["report"] == solved["result"]["verified"]


def test_solve_nash_and_rationalizable(capsys):
    assert run(["solve", "nash", SAMPLES / "congestion.json", "--eps", "0.05"], capsys)[0] == 0
    assert run(["solve", "rationalizable", SAMPLES / "congestion.json", "--delta", "0.05"], capsys)[0] == 0


def test_check_commands(capsys):
    assert run(["check", "grounding", SAMPLES / "two_groups.json", "--samples", "5"], capsys)[0] == 0
    code, out, _ = run(["check", "equicontinuity", SAMPLES / "congestion.json", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["kind"] == "check"


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig("solve", "estimated", game="g.json", eps=0)
    with pytest.raises(UsageError):
        RunConfig("solve", "estimated", game="g.json", eps=0.1, grid=0)
    RunConfig("solve", "rationalizable", game="g.json", delta=0.1)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nonatomic_eq", "examples", "kqrs-hat"], capture_output=True,
                          text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.startswith("verdict: pass")
