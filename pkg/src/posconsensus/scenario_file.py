"""Reading and writing scenario files (YAML).

Layout::

    leader: {A0: [[...]], C0: [[...]]}
    agents:
      - {A: [[...]], B: [[...]], C: [[...]], K1: [[...]], K2: [[...]], K3: [[...]]}
    graphs:
      - {edges: [[0, 2], [1, 2], ...], undirected: [[2, 3], ...]}
    schedule: {kind: periodic, block: 20, order: [1, 2]}
    mu: 0.3            # or "auto"
    mode: state        # state | output | observer
    horizon: 500
    initial: {kind: random-nonnegative, seed: 0, range: [0, 10]}
    # or     {x0: [...], x: [[...], ...], w: [[...], ...], eta: [[...], ...]}

Gains are optional; missing ones are synthesized on load.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .graph import Digraph, GraphError, GraphSchedule, graph_constants
from .scenario import MODES, AssumptionError, Scenario, check_scenario, complete_gains
from .systems import AgentGains, AgentModel, GainSet, LeaderModel

AUTO_MU_FRACTION = 0.9
DEFAULT_RANGE = (0.0, 10.0)

_TOP_KEYS = {"leader", "agents", "graphs", "schedule", "mu", "mode", "horizon", "initial"}
_LEADER_KEYS = {"A0", "C0"}
_AGENT_KEYS = {"A", "B", "C", "K1", "K2", "K3"}
_GRAPH_KEYS = {"edges", "undirected"}
_SCHEDULE_KEYS = {"kind", "block", "order", "index"}
_INIT_RANDOM_KEYS = {"kind", "seed", "range"}
_INIT_EXPLICIT_KEYS = {"x0", "x", "w", "eta"}


class ScenarioFileError(ValueError):
    """Malformed scenario file; carries the offending field path and line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


class ScenarioValidationError(ValueError):
    def __init__(self, error: AssumptionError):
        super().__init__(str(error))
        self.report = error.report


class _Doc:
    """Parsed YAML plus a path -> line index for error messages."""

    def __init__(self, text: str):
        try:
            self.data = yaml.safe_load(text)
            root = yaml.compose(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ScenarioFileError(f"YAML syntax error: {exc}",
                                    line=None if mark is None else mark.line + 1) from exc
        self.lines = {}
        if root is not None:
            self._index(root, ())

    def _index(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[path + (k.value,)] = k.start_mark.line + 1
                self._index(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._index(v, path + (i,))

    def error(self, message: str, path) -> ScenarioFileError:
        path = tuple(path)
        line = None
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                line = self.lines[path[:cut]]
                break
        field = ".".join(str(p) for p in path) if path else None
        return ScenarioFileError(message, field=field, line=line)


def _mapping(doc: _Doc, value, path, allowed, required=()):
    if not isinstance(value, dict):
        raise doc.error("expected a mapping", path)
    unknown = sorted(set(value) - set(allowed), key=str)
    if unknown:
        raise doc.error(f"unknown keys {unknown}", path)
    missing = [k for k in required if k not in value]
    if missing:
        raise doc.error(f"missing keys {missing}", path)
    return value


def _matrix(doc: _Doc, value, path) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise doc.error("expected a matrix as a non-empty list of rows", path)
    width = len(value[0])
    if width == 0 or any(len(r) != width for r in value):
        raise doc.error("matrix rows must be non-empty and of equal length", path)
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise doc.error(f"non-numeric matrix entry ({exc})", path) from exc


def _vector(doc: _Doc, value, path) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise doc.error("expected a non-empty list of numbers", path)
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise doc.error(f"non-numeric vector entry ({exc})", path) from exc


def _pairs(doc: _Doc, value, path) -> list:
    if not isinstance(value, list):
        raise doc.error("expected a list of [from, to] pairs", path)
    out = []
    for i, e in enumerate(value):
        if not isinstance(e, list) or len(e) != 2:
            msg = ("weighted edges are not supported; adjacency is 0/1"
                   if isinstance(e, list) and len(e) == 3 else "edge must be a [from, to] pair")
            raise doc.error(msg, path + (i,))
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in e):
            raise doc.error("edge endpoints must be integers", path + (i,))
        out.append(tuple(e))
    return out


def loads_scenario(text: str, *, seed: int | None = None, validate: bool = True,
                   synthesize: bool = True) -> Scenario:
    """Parse scenario text.

    ``seed`` overrides the seed of a random initial condition. With
    ``validate`` the pre-run checks are applied and a failing scenario raises
    :class:`ScenarioValidationError`.
    """
    doc = _Doc(text)
    top = _mapping(doc, doc.data, (), _TOP_KEYS, required=("leader", "agents", "graphs"))

    lead = _mapping(doc, top["leader"], ("leader",), _LEADER_KEYS, required=("A0", "C0"))
    leader = LeaderModel(_matrix(doc, lead["A0"], ("leader", "A0")),
                         _matrix(doc, lead["C0"], ("leader", "C0")))

    if not isinstance(top["agents"], list) or not top["agents"]:
        raise doc.error("expected a non-empty list of agents", ("agents",))
    agents, gains = [], []
    for i, raw in enumerate(top["agents"]):
        path = ("agents", i)
        entry = _mapping(doc, raw, path, _AGENT_KEYS, required=("A", "B", "C"))
        mats = {k: _matrix(doc, entry[k], path + (k,)) for k in _AGENT_KEYS if k in entry}
        try:
            agents.append(AgentModel(mats["A"], mats["B"], mats["C"], id=i + 1))
        except ValueError as exc:
            raise doc.error(str(exc), path) from exc
        gains.append(AgentGains(K1=mats.get("K1"), K2=mats.get("K2"), K3=mats.get("K3")))
    n = len(agents)

    if not isinstance(top["graphs"], list) or not top["graphs"]:
        raise doc.error("expected a non-empty list of graphs", ("graphs",))
    family = []
    for p, raw in enumerate(top["graphs"]):
        path = ("graphs", p)
        entry = _mapping(doc, raw, path, _GRAPH_KEYS)
        try:
            family.append(Digraph.from_edges(
                n, directed=_pairs(doc, entry.get("edges", []), path + ("edges",)),
                undirected=_pairs(doc, entry.get("undirected", []), path + ("undirected",))))
        except GraphError as exc:
            raise doc.error(str(exc), path) from exc

    sched = _mapping(doc, top.get("schedule", {"kind": "periodic", "block": 1}), ("schedule",),
                     _SCHEDULE_KEYS)
    try:
        schedule = GraphSchedule(family=tuple(family), kind=sched.get("kind", "periodic"),
                                 block=sched.get("block", 1), order=tuple(sched.get("order", ())),
                                 index=sched.get("index", 1))
    except (GraphError, TypeError, ValueError) as exc:
        raise doc.error(str(exc), ("schedule",)) from exc

    mu_raw = top.get("mu", "auto")
    if mu_raw == "auto":
        try:
            mu = AUTO_MU_FRACTION * graph_constants(schedule).mu_max
        except GraphError as exc:
            raise doc.error(f"cannot resolve mu=auto: {exc}", ("mu",)) from exc
    elif isinstance(mu_raw, (int, float)) and not isinstance(mu_raw, bool):
        mu = float(mu_raw)
    else:
        raise doc.error("mu must be a number or 'auto'", ("mu",))

    mode = top.get("mode", "state")
    if mode not in MODES:
        raise doc.error(f"mode must be one of {MODES}", ("mode",))
    horizon = top.get("horizon", 500)
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 0:
        raise doc.error("horizon must be a nonnegative integer", ("horizon",))

    x0, x_init, w_init, eta_init = _initial(doc, top.get("initial", {"kind": "random-nonnegative"}),
                                            leader, agents, seed)

    try:
        s = Scenario(leader=leader, agents=agents, schedule=schedule, gains=GainSet(gains, mu),
                     x0=x0, x_init=x_init, mode=mode, horizon=horizon,
                     w_init=w_init, eta_init=eta_init)
    except ValueError as exc:
        raise doc.error(str(exc), ()) from exc

    if validate:
        # gaps that synthesis will fill are not failures yet
        report = check_scenario(s)
        if any(not it.reason.endswith("missing") for it in report.failures()):
            raise ScenarioValidationError(AssumptionError(report))
    if synthesize:
        complete_gains(s)
    if validate:
        report = check_scenario(s)
        if not report.ok:
            raise ScenarioValidationError(AssumptionError(report))
    return s


def _initial(doc: _Doc, raw, leader, agents, seed):
    path = ("initial",)
    if not isinstance(raw, dict):
        raise doc.error("expected a mapping", path)
    if "kind" in raw:
        entry = _mapping(doc, raw, path, _INIT_RANDOM_KEYS)
        if entry["kind"] != "random-nonnegative":
            raise doc.error("initial.kind must be 'random-nonnegative'", path + ("kind",))
        lo, hi = entry.get("range", DEFAULT_RANGE)
        if not 0 <= lo <= hi:
            raise doc.error("range must satisfy 0 <= low <= high", path + ("range",))
        rng = np.random.default_rng(entry.get("seed", 0) if seed is None else seed)
        x0 = rng.uniform(lo, hi, leader.n)
        x_init = [rng.uniform(lo, hi, a.n) for a in agents]
        return x0, x_init, None, None
    entry = _mapping(doc, raw, path, _INIT_EXPLICIT_KEYS, required=("x0", "x"))
    x0 = _vector(doc, entry["x0"], path + ("x0",))

    def vectors(key):
        if key not in entry:
            return None
        if not isinstance(entry[key], list) or len(entry[key]) != len(agents):
            raise doc.error(f"expected one vector per agent ({len(agents)})", path + (key,))
        return [_vector(doc, v, path + (key, i)) for i, v in enumerate(entry[key])]

    return x0, vectors("x"), vectors("w"), vectors("eta")


def parse_scenario(path, **kwargs) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"), **kwargs)


def _rows(M) -> list:
    return np.asarray(M, dtype=float).tolist()


def scenario_to_dict(s: Scenario) -> dict:
    agents = []
    for a, g in zip(s.agents, s.gains.agents):
        entry = {"A": _rows(a.A), "B": _rows(a.B), "C": _rows(a.C)}
        for k in ("K1", "K2", "K3"):
            if getattr(g, k) is not None:
                entry[k] = _rows(getattr(g, k))
        agents.append(entry)
    sched = {"kind": s.schedule.kind}
    if s.schedule.kind == "periodic":
        sched.update(block=s.schedule.block, order=list(s.schedule.order))
    elif s.schedule.kind == "list":
        sched["order"] = list(s.schedule.order)
    else:
        sched["index"] = s.schedule.index
    initial = {"x0": s.x0.tolist(), "x": [v.tolist() for v in s.x_init]}
    if s.w_init is not None:
        initial["w"] = [v.tolist() for v in s.w_init]
    if s.eta_init is not None:
        initial["eta"] = [v.tolist() for v in s.eta_init]
    return {
        "leader": {"A0": _rows(s.leader.A0), "C0": _rows(s.leader.C0)},
        "agents": agents,
        "graphs": [{"edges": [list(e) for e in g.sorted_edges()]} for g in s.schedule.family],
        "schedule": sched,
        "mu": float(s.mu),
        "mode": s.mode,
        "horizon": s.horizon,
        "initial": initial,
    }


def emit_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


def reference_example_text() -> str:
    return resources.files("posconsensus").joinpath("data/reference_example.yaml").read_text(encoding="utf-8")


def load_reference_example(**kwargs) -> Scenario:
    """The bundled three-follower example with the switching pair of graphs."""
    return loads_scenario(reference_example_text(), **kwargs)
