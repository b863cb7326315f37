import csv
import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from swarm_reshape.cli import main
from swarm_reshape.config import dump_scenario, load_reference
from swarm_reshape.core import AgentState, Pose, Vec2, WorldState
from swarm_reshape.engine import EventKind, SimulationResult
from swarm_reshape.output import dumps, fmt, pair_statistics, write_outputs

FILES = ("trajectories.csv", "distances.csv", "events.csv", "summary.json")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fmt_and_dumps():
    assert fmt(-0.0000001) == "0.000000"
    assert fmt(1 / 3) == "0.333333"
    with pytest.raises(ValueError):
        fmt(float("nan"))
    text = dumps({"a": 1.0, "b": [1, None, True], "c": {}})
    assert json.loads(text) == {"a": 1.0, "b": [1, None, True], "c": {}}
    assert '"a": 1.000000' in text


def test_one_agent_two_ticks(tmp_path):
    cfg = replace(load_reference(), n_agents=1, formation=replace(load_reference().formation, n_agents=1))
    worlds = [WorldState(k, 0.1, (AgentState.create(1, Pose(Vec2(0.2 * k, 0.0), 0.0), 2.0),)) for k in range(2)]
    result = SimulationResult(cfg, worlds, [], False)
    write_outputs(result, tmp_path)
    rows = read_csv(tmp_path / "trajectories.csv")
    assert len(rows) == 2 and rows[1]["x"] == "0.200000"
    assert read_csv(tmp_path / "distances.csv") == []
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["ticks"] == 2 and summary["reformation_time"] is None


def test_reference_outputs_are_consistent(dfrpsr_run, tmp_path):
    result, _ = dfrpsr_run
    write_outputs(result, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    events = read_csv(tmp_path / "events.csv")
    restored = [e for e in events if e["kind"] == EventKind.FORMATION_RESTORED.value]
    assert len(restored) == 1
    assert fmt(summary["reformation_time"]) == restored[0]["time"]
    assert summary["events"][EventKind.FORMATION_RESTORED.value] == 1
    # re-aggregate the distance file independently
    by_pair = {}
    for row in read_csv(tmp_path / "distances.csv"):
        by_pair.setdefault(f"{row['follower_id']}-{row['leader_id']}", []).append(float(row["distance"]))
    assert set(by_pair) == set(summary["pairs"])
    for key, values in by_pair.items():
        stats = summary["pairs"][key]
        assert stats["samples"] == len(values)
        assert stats["min"] == pytest.approx(min(values), abs=1e-6)
        assert stats["max"] == pytest.approx(max(values), abs=1e-6)
        assert stats["median"] == pytest.approx(float(np.median(values)), abs=1e-5)


def test_pair_statistics_percentiles():
    stats = pair_statistics([(0.0, 2, 1, d) for d in (1.0, 2.0, 3.0, 4.0, 5.0)])
    assert stats["2-1"] == {"follower_id": 2, "leader_id": 1, "samples": 5, "min": 1.0,
                            "p25": 2.0, "median": 3.0, "p75": 4.0, "max": 5.0}


def test_unwritable_output_names_path(dfrpsr_run, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_outputs(dfrpsr_run[0], blocker / "out")


def test_cli_run(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == 0
    for name in FILES:
        assert (tmp_path / name).is_file()
    assert "complete" in capsys.readouterr().out


def test_cli_run_mode_override_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SWARM_OUT_DIR", str(tmp_path))
    assert main(["run", "--mode", "baseline"]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["mode"] == "baseline"


def test_cli_compare(tmp_path):
    assert main(["compare", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "comparison.json").read_text())
    assert report["dfrpsr"]["reformation_time"] < report["baseline"]["reformation_time"]
    assert report["dfrpsr_faster"] is True
    for mode in ("dfrpsr", "baseline"):
        for name in FILES:
            assert (tmp_path / mode / name).is_file()


def test_cli_scenario_file(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(dump_scenario(replace(load_reference(), obstacles=(), max_time=5.0)))
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 0
    assert len(read_csv(tmp_path / "o" / "trajectories.csv")) == 51 * 7


@pytest.mark.parametrize("argv", [["bogus"], ["run", "--nope"], []])
def test_cli_usage_errors_exit_2(argv, tmp_path):
    assert main(argv) == 2


def test_cli_missing_out_exits_2(monkeypatch):
    monkeypatch.delenv("SWARM_OUT_DIR", raising=False)
    assert main(["run"]) == 2


def test_cli_bad_scenario_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[swarm]\nn_agents = 3\ndt = 0\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert "swarm.dt" in capsys.readouterr().err
    assert main(["run", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 1


def test_cli_verify_single_suite(capsys):
    assert main(["verify", "--suite", "chains"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "swarm_reshape", "verify", "--suite", "chains"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and "PASS" in proc.stdout
