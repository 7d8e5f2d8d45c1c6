"""Command-line interface behavior and exit codes."""
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_scenario
from rigid_coverage.cli import main
from rigid_coverage.config import config_from_dict
from rigid_coverage.coverage import coverage_cost, voronoi_partition
from rigid_coverage.graphs import Graph, graph_from_dict, graph_to_json, laman_check

NON_LAMAN = {
    "n": 6,
    "edges": [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3], [3, 4], [4, 5], [3, 5]],
}


def test_graph_gen_to_rigidity_check(tmp_path, capsys):
    graph_file = tmp_path / "g.json"
    assert main(["graph", "gen", "--n", "7", "--seed", "3", "--out", str(graph_file)]) == 0
    graph = graph_from_dict(json.loads(graph_file.read_text()))
    assert graph.n == 7 and laman_check(graph)

    assert main(["rigidity", "check", str(graph_file)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["laman"] is True
    assert report["violating_subset"] is None
    assert report["m"] == 2 * 7 - 3
    assert "rank" not in report  # no positions given


def test_rigidity_check_with_positions(tmp_path, capsys):
    rng = np.random.default_rng(5)
    data = {
        "n": 4,
        "edges": [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3]],
        "positions": rng.uniform(0.0, 1.0, size=(4, 2)).tolist(),
    }
    path = tmp_path / "fw.json"
    path.write_text(json.dumps(data))
    assert main(["rigidity", "check", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rank"] == report["max_rank"] == 2 * 4 - 3
    assert report["rigid"] is True


def test_rigidity_check_reports_violating_subset(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(NON_LAMAN))
    assert main(["rigidity", "check", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["laman"] is False
    assert report["violating_subset"] == [0, 1, 2, 3]


def test_recover_loss_and_plan(tmp_path, capsys):
    fan = Graph(6, frozenset([(0, j) for j in range(1, 6)] + [(1, 2), (2, 3), (3, 4), (4, 5)]))
    path = tmp_path / "fan.json"
    path.write_text(graph_to_json(fan))

    assert main(["recover", "--graph", str(path), "--lose", "0"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["lost"] == 0
    assert payload["new_edges"] == [[1, 3], [1, 4], [1, 5]]
    assert payload["contraction_vertex"] == 1

    assert main(["recover", "plan", "--graph", str(path)]) == 0
    plan = json.loads(capsys.readouterr().out)
    covered = {int(v) for key in plan for v in key.split(":")}
    assert covered == set(range(6))  # every possible loss has a prepared entry

    assert main(["recover", "--graph", str(path)]) == 1
    assert "--lose" in capsys.readouterr().err


def test_coverage_cost_matches_library(tmp_path, capsys):
    scenario = make_scenario()
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(scenario))
    positions = [[0.2, 0.2], [0.6, 0.3], [0.4, 0.8]]
    pos_path = tmp_path / "pos.json"
    pos_path.write_text(json.dumps(positions))

    assert main(["coverage", "cost", "--config", str(cfg_path), "--positions", str(pos_path)]) == 0
    printed = float(capsys.readouterr().out)

    cfg = config_from_dict(scenario)
    pts = np.asarray(positions)
    expected = coverage_cost(pts, voronoi_partition(pts, cfg.region), cfg.density, cfg.quad_order)
    assert printed == pytest.approx(expected, rel=1e-8)


def test_validate_ok(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(make_scenario(steps=3)))
    assert main(["validate", "--config", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_non_laman_config(tmp_path, capsys):
    data = make_scenario(steps=3)
    data["graph"] = NON_LAMAN
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    assert main(["validate", "--config", str(path)]) == 1
    err = capsys.readouterr().err
    assert "violating subset" in err


def test_validate_missing_file(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert main(["validate", "--config", str(missing)]) == 1
    assert "absent.json" in capsys.readouterr().err


def test_simulate_writes_artifacts(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(make_scenario(steps=2)))
    out_dir = tmp_path / "run"
    assert main(["simulate", "--config", str(path), "--out", str(out_dir)]) == 0
    err = capsys.readouterr().err
    assert "wrote" in err and str(out_dir) in err
    for name in ("trajectories.csv", "cost.csv", "events.json", "summary.json", "plot.gp"):
        assert (out_dir / name).is_file()


def test_simulate_seed_override(tmp_path):
    data = make_scenario(steps=2)
    del data["graph"]["generate"]["seed"]  # let the global seed drive generation
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))

    for seed in ("7", "7", "8"):
        out = tmp_path / f"run-{seed}-{np.random.randint(1 << 30)}"
        assert main(["simulate", "--config", str(path), "--out", str(out), "--seed", seed]) == 0
    runs = sorted(tmp_path.glob("run-*"))
    a, b, c = (p / "trajectories.csv" for p in runs)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_simulate_out_collides_with_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(make_scenario(steps=1)))
    blocker = tmp_path / "taken"
    blocker.write_text("")
    assert main(["simulate", "--config", str(cfg), "--out", str(blocker)]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_arguments_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--config", "x.json", "--frobnicate"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["telemetry"])
    assert info.value.code == 1


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "rigid_coverage.cli", "graph", "gen", "--n", "5", "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    graph = graph_from_dict(json.loads(proc.stdout))
    assert graph.n == 5 and laman_check(graph)
