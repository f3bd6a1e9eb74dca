import json
import shutil
from pathlib import Path

import pytest

from zsgames.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FAST = ["riccati_counterexample", "riccati_lq", "saddle_aq", "hamiltonian_lq", "trajectory_lq",
        "hypotheses", "dp_lq"]


def kind_of(path: Path) -> str:
    for line in path.read_text().splitlines():
        if line.startswith("kind:"):
            return line.split(":", 1)[1].strip()
    raise AssertionError(path)


def run(tmp_path, name, *extra):
    src = SCENARIOS / f"{name}.yaml"
    return main([kind_of(src), "--scenario", str(src), "--out-dir", str(tmp_path), *extra])


def write(tmp_path, text) -> Path:
    path = tmp_path / "in.yaml"
    path.write_text(text)
    return path


@pytest.mark.parametrize("name", FAST)
def test_example_scenarios_succeed(tmp_path, name, capsys):
    assert run(tmp_path / "out", name, "--summary") == 0
    verdict = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert verdict["status"] == "ok"
    assert all(Path(p).exists() and Path(p).name.startswith(name + ".") for p in verdict["artifacts"])


def test_riccati_counterexample_summary(tmp_path):
    assert run(tmp_path, "riccati_counterexample") == 0
    payload = json.loads((tmp_path / "riccati_counterexample.riccati.json").read_text())
    assert payload["solvable_all_T"] is False


def test_hj_scenario(tmp_path, capsys):
    assert run(tmp_path, "hj_lq", "--summary") == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["err_vs_riccati"] <= 0.02 and verdict["ordered"] is True
    lines = (tmp_path / "hj_lq.value_field.csv").read_text().splitlines()
    assert lines[0] == "t,x,V"
    sidecar = json.loads((tmp_path / "hj_lq.value_field.json").read_text())
    assert sidecar["grid"]["nx"] == 401


def test_idempotent(tmp_path):
    for name in ("trajectory_lq", "saddle_aq"):
        assert run(tmp_path / "a", name) == 0
        assert run(tmp_path / "b", name) == 0
        first = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
        second = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
        assert first == second
        assert run(tmp_path / "a", name) == 0
        assert {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()} == first


def test_seed_flag_changes_random_controls(tmp_path):
    assert run(tmp_path / "a", "trajectory_lq") == 0
    assert run(tmp_path / "b", "trajectory_lq", "--seed", "8") == 0
    a = (tmp_path / "a" / "trajectory_lq.trajectory.csv").read_bytes()
    assert a != (tmp_path / "b" / "trajectory_lq.trajectory.csv").read_bytes()


def test_malformed_yaml(tmp_path, capsys):
    path = write(tmp_path, "kind: riccati\nname: bad\nparams: {problem: [1, 2\n")
    out = tmp_path / "out"
    assert main(["riccati", "--scenario", str(path), "--out-dir", str(out)]) == 1
    assert "line" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_keys_listed(tmp_path, capsys):
    path = write(tmp_path, "kind: riccati\nname: bad\nbogus: 1\nparams: {}\n")
    assert main(["riccati", "--scenario", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    path = write(tmp_path, "kind: riccati\nparams:\n  problem: {alpha: 1, beta: 1, gamma: 1,"
                           " g: 0, extra: 2}\n  typo: 3\n")
    assert main(["riccati", "--scenario", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "bogus" in err and "extra" in err and "typo" in err
    assert not (tmp_path / "o").exists()


def test_kind_mismatch_and_missing_file(tmp_path):
    src = SCENARIOS / "riccati_lq.yaml"
    assert main(["saddle", "--scenario", str(src), "--out-dir", str(tmp_path / "o")]) == 1
    assert main(["saddle", "--scenario", str(tmp_path / "none.yaml")]) == 1


def test_invalid_values_exit_1(tmp_path):
    path = write(tmp_path, "kind: riccati\nparams:\n  lq: {type: lq, R1: 0.0}\n")
    assert main(["riccati", "--scenario", str(path), "--out-dir", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_certificate_violation_exit_2(tmp_path, capsys):
    path = write(tmp_path, """kind: trajectory
name: fault
params:
  game:
    type: lq
    A: 5.0
    constants: {L: 0.5, c: 1.0, sigma1: 1, sigma2: 1, rho1: 2, rho2: 2, mu: 2}
  x0: 1.0
  steps: 50
""")
    assert main(["trajectory", "--scenario", str(path), "--out-dir", str(tmp_path), "--summary"]) == 2
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["status"] == "violation" and verdict["violations"] > 0


def test_scenarios_are_self_contained(tmp_path):
    copy = tmp_path / "copy.yaml"
    shutil.copy(SCENARIOS / "hypotheses.yaml", copy)
    assert main(["check-hypotheses", "--scenario", str(copy), "--out-dir", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "hypotheses.hypotheses.json").read_text())
    assert payload["coercive"] and payload["implication_self_test"]
