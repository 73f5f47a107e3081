"""Scenario files: system, environment, start state, planner settings, trials.

Scenarios are JSON documents checked against ``data/scenario.schema.json``
and then for dimensional consistency. Matrices are row-major nested arrays.
"""

import copy
import dataclasses
from dataclasses import dataclass
from importlib import resources
import json

import jsonschema
import numpy as np

from .errors import InvalidInputError, InvalidScenarioError
from .lti import LinearSystem, QuadrotorParams, TerminalPenalty, build_double_integrator_2d, build_quadrotor_10d
from .planner import MODES, PlannerConfig
from .world import Box, Environment

__all__ = [
    "Scenario",
    "BUILTIN_SCENARIOS",
    "BUILTIN_SYSTEMS",
    "load_scenario",
    "loads_scenario",
    "save_scenario",
    "dumps_scenario",
    "builtin_scenario",
    "builtin_scenario_text",
    "build_system",
]

BUILTIN_SCENARIOS = ("double_integrator", "quadrotor")
BUILTIN_SYSTEMS = ("double_integrator", "quadrotor")

_PLANNER_DEFAULTS = {
    "iterations": 1000,
    "max_segment_length": 5.0,
    "neighbor_radius": 6.0,
    "v_des": 1.5,
    "delayed_update_period": 500,
    "collision_delta": 0.05,
    "t_bounds": None,
}
_TRIAL_DEFAULTS = {"modes": list(MODES[:2]), "seeds": [1]}


def _schema():
    text = resources.files("kinorrt").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


_VALIDATOR = None


def _validator():
    global _VALIDATOR
    if _VALIDATOR is None:
        _VALIDATOR = jsonschema.Draft202012Validator(_schema())
    return _VALIDATOR


def _field(path):
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated experiment definition.

    ``spec`` is the normalised JSON document (defaults filled in); two
    scenarios are equal when their specs are.
    """

    name: str
    system: LinearSystem
    penalty: TerminalPenalty
    environment: Environment
    start: np.ndarray
    config: PlannerConfig
    modes: tuple
    seeds: tuple
    spec: dict

    def to_dict(self):
        return copy.deepcopy(self.spec)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.spec == other.spec

    def config_for(self, mode, seed, **overrides):
        return dataclasses.replace(self.config, mode=mode, seed=int(seed), **overrides)

    def replace_planner(self, **fields):
        """Copy with some planner settings changed (e.g. ``iterations``)."""
        spec = self.to_dict()
        spec["planner"].update(fields)
        return _from_spec(spec)


def build_system(spec, where="system"):
    """``(LinearSystem, TerminalPenalty or None)`` from a system spec dict."""
    try:
        if "builtin" in spec:
            name = spec["builtin"]
            params = spec.get("params") or {}
            if name == "double_integrator":
                if params:
                    raise InvalidScenarioError(f"{where}.params: double_integrator takes no parameters")
                system, penalty = build_double_integrator_2d(), None
            elif name == "quadrotor":
                try:
                    qp = QuadrotorParams(**params)
                except TypeError as exc:
                    raise InvalidScenarioError(f"{where}.params: {exc}") from None
                system, penalty = build_quadrotor_10d(qp)
            else:
                raise InvalidScenarioError(
                    f"{where}.builtin: unknown system {name!r}; choose from {BUILTIN_SYSTEMS}")
            if "n1" in spec and spec["n1"] != system.n1:
                system = system.with_partition(spec["n1"])
                penalty = None
        else:
            A = np.array(spec["A"], dtype=float)
            n = A.shape[0]
            c = spec.get("c", [0.0] * n)
            system = LinearSystem(_shaped(spec["A"], "A", where), _shaped(spec["B"], "B", where),
                                  _shaped(c, "c", where), _shaped(spec["R"], "R", where), spec["n1"])
            penalty = None
    except InvalidScenarioError:
        raise
    except (InvalidInputError, ValueError) as exc:
        field = _guess_field(str(exc))
        raise InvalidScenarioError(f"{where}{'.' + field if field else ''}: {exc}") from None
    if "S" in spec:
        if spec["S"] is None:
            penalty = None
        else:
            try:
                penalty = TerminalPenalty(spec["S"])
            except (InvalidInputError, ValueError) as exc:
                raise InvalidScenarioError(f"{where}.S: {exc}") from None
            if penalty.S.shape != (system.n2, system.n2):
                raise InvalidScenarioError(
                    f"{where}.S: dimension mismatch, expected {(system.n2, system.n2)} "
                    f"for the free block, got {penalty.S.shape}")
    return system, penalty


def _shaped(value, name, where):
    try:
        return np.array(value, dtype=float)
    except ValueError:
        raise InvalidScenarioError(f"{where}.{name}: ragged matrix") from None


def _guess_field(message):
    for name in ("A", "B", "c", "R", "n1", "S"):
        if message.startswith(name + " ") or message.startswith(f"({name}"):
            return name.strip("(")
    return ""


def _normalise(doc):
    spec = copy.deepcopy(doc)
    spec.setdefault("name", "scenario")
    env = spec["environment"]
    env.setdefault("full_sample_bounds", [])
    env.setdefault("obstacles", [])
    env.setdefault("goal", None)
    planner = dict(_PLANNER_DEFAULTS)
    planner.update(spec.get("planner") or {})
    spec["planner"] = planner
    trials = copy.deepcopy(_TRIAL_DEFAULTS)
    trials.update(spec.get("trials") or {})
    spec["trials"] = trials
    return spec


def _from_spec(doc):
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InvalidScenarioError(f"{_field(err.absolute_path)}: {err.message}")
    spec = _normalise(doc)
    system, penalty = build_system(spec["system"])
    env_spec = spec["environment"]
    k, n = system.n1, system.n
    if len(env_spec["position_bounds"]) != k:
        raise InvalidScenarioError(
            f"environment.position_bounds: dimension mismatch, system samples {k} "
            f"components but {len(env_spec['position_bounds'])} intervals given")
    if len(env_spec["full_sample_bounds"]) != n - k:
        raise InvalidScenarioError(
            f"environment.full_sample_bounds: dimension mismatch, expected {n - k} "
            f"intervals, got {len(env_spec['full_sample_bounds'])}")
    boxes = []
    for i, box in enumerate(env_spec["obstacles"]):
        boxes.append(_box(box, k, f"environment.obstacles[{i}]"))
    goal = None if env_spec["goal"] is None else _box(env_spec["goal"], k, "environment.goal")
    try:
        env = Environment(env_spec["position_bounds"], env_spec["full_sample_bounds"],
                          tuple(boxes), goal)
    except InvalidInputError as exc:
        raise InvalidScenarioError(f"environment: {exc}") from None
    start = np.array(spec["start"], dtype=float)
    if start.shape != (n,):
        raise InvalidScenarioError(
            f"start: dimension mismatch, expected {n} components, got {start.shape[0]}")
    start.setflags(write=False)
    planner = dict(spec["planner"])
    if planner["t_bounds"] is not None:
        planner["t_bounds"] = tuple(planner["t_bounds"])
    try:
        config = PlannerConfig(**planner)
    except InvalidInputError as exc:
        raise InvalidScenarioError(f"planner: {exc}") from None
    trials = spec["trials"]
    return Scenario(spec["name"], system, penalty, env, start, config,
                    tuple(trials["modes"]), tuple(trials["seeds"]), spec)


def _box(spec, k, where):
    if len(spec["lo"]) != k or len(spec["hi"]) != k:
        raise InvalidScenarioError(f"{where}: dimension mismatch, expected {k} coordinates")
    try:
        return Box(spec["lo"], spec["hi"])
    except InvalidInputError as exc:
        raise InvalidScenarioError(f"{where}: {exc}") from None


def loads_scenario(text, source="<string>"):
    """Parse and validate scenario JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScenarioError(
            f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return _from_spec(doc)
    except InvalidScenarioError as exc:
        raise InvalidScenarioError(f"{source}: {exc}") from None


def load_scenario(path):
    """Read a scenario file. ``OSError`` propagates for missing files."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_scenario(text, source=str(path))


def _compact(value, indent=0):
    pad = "  " * indent
    if isinstance(value, dict):
        flat = json.dumps(value)
        if not value or (len(flat) <= 72 and not any(isinstance(v, dict) for v in value.values())):
            return flat
        items = [f'{pad}  {json.dumps(k)}: {_compact(v, indent + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list) and any(isinstance(v, dict) for v in value):
        items = [pad + "  " + _compact(v, indent + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(value)


def dumps_scenario(scenario):
    """Serialise to JSON text with numeric arrays kept on one line."""
    spec = scenario.spec if isinstance(scenario, Scenario) else scenario
    return _compact(spec) + "\n"


def save_scenario(scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenario(scenario))


def builtin_scenario_text(name):
    if name not in BUILTIN_SCENARIOS:
        raise InvalidScenarioError(f"unknown built-in scenario {name!r}; choose from {BUILTIN_SCENARIOS}")
    return resources.files("kinorrt").joinpath(f"data/{name}.json").read_text()


def builtin_scenario(name):
    """One of the shipped fixtures, parsed."""
    return loads_scenario(builtin_scenario_text(name), source=f"<builtin {name}>")
