import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kinorrt.errors import InvalidScenarioError
from kinorrt.scenario import (
    builtin_scenario,
    builtin_scenario_text,
    dumps_scenario,
    load_scenario,
    loads_scenario,
    save_scenario,
)

MINIMAL = {
    "system": {"builtin": "double_integrator"},
    "environment": {
        "position_bounds": [[0, 10], [0, 10]],
        "full_sample_bounds": [[-1, 1], [-1, 1]],
        "goal": {"lo": [8, 8], "hi": [9, 9]},
    },
    "start": [1, 1, 0, 0],
}

EXPLICIT = {
    "system": {
        "A": [[0, 1], [0, 0]],
        "B": [[0], [1]],
        "c": [0, 0],
        "R": [[2.0]],
        "n1": 1,
        "S": [[3.0]],
    },
    "environment": {"position_bounds": [[0, 10]], "full_sample_bounds": [[-1, 1]]},
    "start": [1, 0],
}


def doc_with(base, path, value):
    doc = json.loads(json.dumps(base))
    target = doc
    for key in path[:-1]:
        target = target[key]
    if value is KeyError:
        del target[path[-1]]
    else:
        target[path[-1]] = value
    return json.dumps(doc)


# -- built-in fixtures -------------------------------------------------------------

def test_double_integrator_fixture():
    sc = builtin_scenario("double_integrator")
    assert (sc.system.n, sc.system.n1) == (4, 2)
    np.testing.assert_array_equal(sc.system.R, np.eye(2))
    assert sc.penalty is None
    np.testing.assert_array_equal(sc.environment.position_bounds, [[0, 20], [0, 20]])
    np.testing.assert_array_equal(sc.environment.full_sample_bounds, [[-2, 2], [-2, 2]])
    assert 0.2 <= sc.environment.obstacle_volume_fraction() <= 0.3
    cfg = sc.config
    assert (cfg.iterations, cfg.max_segment_length, cfg.neighbor_radius, cfg.v_des) == (4000, 5, 6, 1.5)
    assert sc.seeds == tuple(range(1, 11))


def test_quadrotor_fixture():
    sc = builtin_scenario("quadrotor")
    assert (sc.system.n, sc.system.n1, sc.system.m) == (10, 3, 3)
    np.testing.assert_array_equal(sc.penalty.S, np.diag([0, 0, 0, 20, 20, 0, 0]))
    np.testing.assert_array_equal(sc.environment.full_sample_bounds,
                                  [[-2, 2]] * 3 + [[-1, 1]] * 2 + [[-4, 4]] * 2)
    assert 0.2 <= sc.environment.obstacle_volume_fraction() <= 0.3


def test_unknown_builtin_scenario():
    with pytest.raises(InvalidScenarioError, match="unknown"):
        builtin_scenario_text("pendulum")


# -- parsing ----------------------------------------------------------------------

def test_minimal_scenario_defaults():
    sc = loads_scenario(json.dumps(MINIMAL))
    assert sc.name == "scenario"
    assert sc.config.iterations == 1000 and sc.config.t_bounds is None
    assert sc.modes == ("kino", "baseline") and sc.seeds == (1,)
    assert sc.environment.obstacles == ()


def test_explicit_system():
    sc = loads_scenario(json.dumps(EXPLICIT))
    assert sc.system.n == 2 and sc.system.n1 == 1
    assert sc.system.R[0, 0] == 2.0
    assert sc.penalty.S[0, 0] == 3.0


def test_parse_error_has_location():
    text = '{\n  "system": {"builtin": "double_integrator"},\n  "start": [1, 2,]\n}'
    with pytest.raises(InvalidScenarioError, match=r"f\.json:3:\d+"):
        loads_scenario(text, source="f.json")


@pytest.mark.parametrize("path,value,field", [
    (("system", "A"), [[0, 1, 0], [0, 0, 0]], "system.A"),
    (("system", "B"), [[0], [1], [0]], "system.B"),
    (("system", "R"), [[-1.0]], "system.R"),
    (("system", "S"), [[1.0, 0.0], [0.0, 1.0]], "system.S"),
    (("system", "n1"), 3, "system"),
    (("start",), [1, 0, 0], "start"),
    (("environment", "position_bounds"), [[0, 10], [0, 10]], "environment.position_bounds"),
    (("environment", "full_sample_bounds"), [], "environment.full_sample_bounds"),
])
def test_dimension_errors_name_the_field(path, value, field):
    with pytest.raises(InvalidScenarioError, match=field.replace(".", r"\.")):
        loads_scenario(doc_with(EXPLICIT, path, value))


def test_obstacle_dimension_error():
    text = doc_with(MINIMAL, ("environment", "obstacles"), [{"lo": [1], "hi": [2]}])
    with pytest.raises(InvalidScenarioError, match=r"environment\.obstacles\[0\]"):
        loads_scenario(text)


@pytest.mark.parametrize("path,value", [
    (("system", "builtin"), "pendulum"),
    (("planner",), {"mode": "kino"}),
    (("trials",), {"modes": ["greedy"]}),
    (("start",), KeyError),
    (("extra",), 1),
])
def test_schema_violations(path, value):
    with pytest.raises(InvalidScenarioError):
        loads_scenario(doc_with(MINIMAL, path, value))


def test_unknown_quadrotor_param():
    doc = {**MINIMAL, "system": {"builtin": "quadrotor", "params": {"mass": 1.0, "wings": 2}}}
    with pytest.raises(InvalidScenarioError, match="system"):
        loads_scenario(json.dumps(doc))


def test_goal_outside_bounds():
    text = doc_with(MINIMAL, ("environment", "goal"), {"lo": [8, 8], "hi": [11, 9]})
    with pytest.raises(InvalidScenarioError, match="goal"):
        loads_scenario(text)


def test_bad_planner_setting():
    text = doc_with(MINIMAL, ("planner",), {"neighbor_radius": 0})
    with pytest.raises(InvalidScenarioError, match="planner"):
        loads_scenario(text)


def test_builtin_partition_override_drops_penalty():
    doc = {**MINIMAL, "system": {"builtin": "double_integrator", "n1": 4},
           "environment": {"position_bounds": [[0, 10], [0, 10], [-1, 1], [-1, 1]]}}
    sc = loads_scenario(json.dumps(doc))
    assert sc.system.n1 == 4 and sc.penalty is None


# -- round trips --------------------------------------------------------------------

@pytest.mark.parametrize("name", ["double_integrator", "quadrotor"])
def test_save_load_round_trip(name, tmp_path):
    sc = builtin_scenario(name)
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    again = load_scenario(path)
    assert again == sc
    assert dumps_scenario(again) == dumps_scenario(sc)
    assert again.environment == sc.environment
    np.testing.assert_array_equal(again.system.A, sc.system.A)


@given(st.integers(0, 5000), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 1000))
def test_round_trip_planner_settings(n, l, r, k):
    sc = loads_scenario(doc_with(MINIMAL, ("planner",), {
        "iterations": n, "max_segment_length": l, "neighbor_radius": r,
        "delayed_update_period": k}))
    again = loads_scenario(dumps_scenario(sc))
    assert again == sc and again.config == sc.config


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_scenario(tmp_path / "nope.json")


def test_replace_planner():
    sc = builtin_scenario("double_integrator").replace_planner(iterations=10)
    assert sc.config.iterations == 10
    assert sc.config_for("baseline", 4).mode == "baseline"
