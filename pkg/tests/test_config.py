"""Config parsing and validation."""
import json

import numpy as np
import pytest

from conftest import make_scenario
from rigid_coverage.config import config_from_dict, load_config
from rigid_coverage.coverage import GaussianMixtureDensity, GridDensity, UniformDensity
from rigid_coverage.dynamics import DragDoubleIntegrator
from rigid_coverage.errors import InvalidInputError
from rigid_coverage.graphs import laman_check


def test_benchmark_scenario_parses():
    cfg = config_from_dict(make_scenario(mu=0.7, steps=25))
    assert cfg.n_robots == 6
    assert cfg.steps == 25
    assert cfg.horizon == 10
    assert laman_check(cfg.graph)
    assert np.allclose(cfg.weights.Q, np.diag([10.0, 10.0, 1.0, 1.0]))
    assert np.allclose(cfg.weights.R, 0.1 * np.eye(2))
    assert cfg.weights.mu == pytest.approx(0.7)
    assert cfg.faults == ()
    assert cfg.initial_states.shape == (6, 4)
    assert np.all(cfg.initial_states[:, 2:] == 0.0)


@pytest.mark.parametrize("key", ["region", "robots", "steps"])
def test_missing_required_field(key):
    data = make_scenario()
    del data[key]
    with pytest.raises(InvalidInputError, match=key):
        config_from_dict(data)


def test_bad_region_rejected():
    data = make_scenario()
    data["region"] = [[0, 0], [0, 1], [1, 1], [1, 0]]  # clockwise
    with pytest.raises(InvalidInputError):
        config_from_dict(data)
    data["region"] = [[0, 0], [1, 0]]
    with pytest.raises(InvalidInputError):
        config_from_dict(data)


def test_position_outside_region():
    data = make_scenario()
    data["robots"]["initial_positions"][3] = [1.5, 0.5]
    with pytest.raises(InvalidInputError, match="robot 3"):
        config_from_dict(data)


def test_coincident_positions():
    data = make_scenario()
    data["robots"]["initial_positions"][1] = data["robots"]["initial_positions"][0]
    with pytest.raises(InvalidInputError, match="coincident"):
        config_from_dict(data)


def test_initial_velocity_out_of_bounds():
    data = make_scenario()
    data["robots"]["initial_velocities"] = [[0.0, 0.0]] * 5 + [[0.9, 0.0]]
    with pytest.raises(InvalidInputError, match="velocity"):
        config_from_dict(data)


def test_velocity_shape_mismatch():
    data = make_scenario()
    data["robots"]["initial_velocities"] = [[0.0, 0.0]] * 3
    with pytest.raises(InvalidInputError, match="initial_velocities"):
        config_from_dict(data)


def test_explicit_graph_and_non_laman_rejection():
    data = make_scenario()
    # fan: hub plus rim path, minimally rigid
    edges = [[0, j] for j in range(1, 6)] + [[1, 2], [2, 3], [3, 4], [4, 5]]
    data["graph"] = {"n": 6, "edges": edges}
    cfg = config_from_dict(data)
    assert cfg.graph.m == 9

    # overbraced K4 glued onto a path: right edge count, wrong distribution
    data["graph"] = {
        "n": 6,
        "edges": [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3], [3, 4], [4, 5], [3, 5]],
    }
    with pytest.raises(InvalidInputError, match="violating subset"):
        config_from_dict(data)


def test_graph_size_mismatch():
    data = make_scenario()
    data["graph"] = {"n": 5, "edges": [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [3, 4], [2, 4]]}
    with pytest.raises(InvalidInputError, match="5"):
        config_from_dict(data)
    data["graph"] = {"generate": {"n": 4, "seed": 1}}
    with pytest.raises(InvalidInputError, match="does not match robot count"):
        config_from_dict(data)


def test_unknown_model():
    data = make_scenario()
    data["robots"]["model"] = {"type": "unicycle"}
    with pytest.raises(InvalidInputError, match="unicycle"):
        config_from_dict(data)


def test_per_robot_list_form():
    data = make_scenario()
    data["robots"] = [
        {"model": "drag_double_integrator", "drag": 0.8, "h": 0.05, "position": [0.2, 0.2]},
        {"model": "drag_double_integrator", "drag": 0.8, "h": 0.05, "position": [0.5, 0.2],
         "velocity": [0.1, 0.0]},
    ]
    data["graph"] = {"n": 2, "edges": [[0, 1]]}
    cfg = config_from_dict(data)
    assert all(isinstance(m, DragDoubleIntegrator) for m in cfg.models)
    assert cfg.initial_states[1, 2] == pytest.approx(0.1)

    data["robots"][1]["h"] = 0.1
    with pytest.raises(InvalidInputError, match="sampling time"):
        config_from_dict(data)


def test_density_variants():
    data = make_scenario()
    del data["density"]
    assert isinstance(config_from_dict(data).density, UniformDensity)

    data["density"] = {"type": "gaussian", "mean": [0.5, 0.5], "cov_diag": [0.1, 0.1]}
    assert isinstance(config_from_dict(data).density, GaussianMixtureDensity)

    data["density"] = {
        "type": "gaussian",
        "components": [
            {"mean": [0.3, 0.3], "cov_diag": [0.05, 0.05], "weight": 2.0},
            {"mean": [0.8, 0.8], "cov_diag": [0.02, 0.02]},
        ],
    }
    density = config_from_dict(data).density
    assert len(density.components) == 2
    assert density.components[0].weight == pytest.approx(2.0)

    data["density"] = {"type": "grid", "values": [[1.0, 2.0], [3.0, 4.0]],
                       "lo": [0.0, 0.0], "hi": [1.0, 1.0]}
    assert isinstance(config_from_dict(data).density, GridDensity)

    data["density"] = {"type": "ring"}
    with pytest.raises(InvalidInputError, match="ring"):
        config_from_dict(data)


def test_weight_matrix_forms():
    data = make_scenario()
    data["mpc"]["weights"]["Q"] = 2.0
    cfg = config_from_dict(data)
    assert np.allclose(cfg.weights.Q, 2.0 * np.eye(4))

    full = np.diag([1.0, 2.0, 3.0, 4.0])
    data["mpc"]["weights"]["Q"] = full.tolist()
    assert np.allclose(config_from_dict(data).weights.Q, full)

    data["mpc"]["weights"]["Q"] = [1.0, 2.0, 3.0]
    with pytest.raises(InvalidInputError, match="Q"):
        config_from_dict(data)


def test_solver_options():
    data = make_scenario()
    data["mpc"]["solver"] = {"max_iter": 60, "tol_stationarity": 1e-5}
    cfg = config_from_dict(data)
    assert cfg.solver.max_iter == 60
    assert cfg.solver.tol_stationarity == pytest.approx(1e-5)

    data["mpc"]["solver"] = {"speed": 11}
    with pytest.raises(InvalidInputError, match="speed"):
        config_from_dict(data)


def test_epsilon_validation():
    data = make_scenario()
    data["epsilon"] = -0.1
    with pytest.raises(InvalidInputError, match="epsilon"):
        config_from_dict(data)
    data["epsilon"] = 0.6  # shrinking the unit square by 0.6 per side empties it
    with pytest.raises(InvalidInputError, match="empty"):
        config_from_dict(data)


def test_steps_validation():
    data = make_scenario()
    data["steps"] = 0
    with pytest.raises(InvalidInputError, match="steps"):
        config_from_dict(data)


def test_fault_validation():
    base = make_scenario(steps=20)

    data = dict(base, faults=[{"at_step": 5, "robot": 2}, {"at_step": 5, "robot": 3}])
    with pytest.raises(InvalidInputError, match="one fault per step"):
        config_from_dict(data)

    data = dict(base, faults=[{"at_step": 25, "robot": 2}])
    with pytest.raises(InvalidInputError, match="beyond"):
        config_from_dict(data)

    data = dict(base, faults=[{"at_step": 3, "robot": 2}, {"at_step": 7, "robot": 2}])
    with pytest.raises(InvalidInputError, match="already-removed"):
        config_from_dict(data)

    data = dict(base, faults=[{"at_step": 2, "robot": 9}])
    with pytest.raises(InvalidInputError, match="unknown"):
        config_from_dict(data)

    data = dict(base, faults=[{"step": 2, "robot": 3}])
    with pytest.raises(InvalidInputError, match="at_step"):
        config_from_dict(data)

    # removals are fine as long as someone survives
    faults = [{"at_step": k + 1, "robot": k} for k in range(5)]
    cfg = config_from_dict(dict(base, faults=faults))
    assert len(cfg.faults) == 5
    assert cfg.faults[0].at_step == 1


def test_load_config_errors(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(InvalidInputError, match="nope.json"):
        load_config(str(missing))

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidInputError, match="bad.json"):
        load_config(str(bad))


def test_load_config_round_trip(tmp_path):
    data = make_scenario(mu=0.1, steps=7, faults=[{"at_step": 2, "robot": 1}])
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    cfg = load_config(str(path))
    ref = config_from_dict(data)
    assert cfg.steps == ref.steps == 7
    assert cfg.weights.mu == pytest.approx(0.1)
    assert cfg.graph.edges == ref.graph.edges
    assert np.array_equal(cfg.initial_states, ref.initial_states)
    assert cfg.faults == ref.faults
