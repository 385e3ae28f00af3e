"""Scenario container, the pre-run assumption suite, and gain completion."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphConstants, GraphError, GraphSchedule, check_assumption_graph, graph_constants, validate_mu
from .linalg import DEFAULT_TOL, as_vector, is_nonnegative
from .regulator import compute_feedforward_gain, solve_regulator
from .systems import (
    GainSet,
    LeaderModel,
    SynthesisInfeasible,
    check_leader,
    check_positive_system,
    synthesize_observer_gain,
    synthesize_state_gain,
    verify_observer_gain,
    verify_state_gain,
)

MODES = ("state", "output", "observer")
DEFAULT_HORIZON = 500


@dataclass(eq=False)
class Scenario:
    leader: LeaderModel
    agents: list
    schedule: GraphSchedule
    gains: GainSet
    x0: np.ndarray
    x_init: list
    mode: str = "state"
    horizon: int = DEFAULT_HORIZON
    # nonzero values are outside the convergence guarantees; only run with override
    w_init: list | None = None
    eta_init: list | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.horizon) < 0:
            raise ValueError("horizon must be >= 0")
        self.horizon = int(self.horizon)
        self.agents = list(self.agents)
        if len(self.agents) != self.schedule.n_followers:
            raise ValueError(f"{len(self.agents)} agents but the graphs have "
                             f"{self.schedule.n_followers} followers")
        if len(self.gains.agents) != len(self.agents):
            raise ValueError("one gain entry per agent is required")
        self.x0 = as_vector(self.x0, "x0")
        if self.x0.shape[0] != self.leader.n:
            raise ValueError(f"x0 has length {self.x0.shape[0]}, expected {self.leader.n}")
        if len(self.x_init) != len(self.agents):
            raise ValueError("one initial state per agent is required")
        self.x_init = [as_vector(v, "x_init") for v in self.x_init]
        for a, v in zip(self.agents, self.x_init):
            if v.shape[0] != a.n:
                raise ValueError(f"agent {a.id}: initial state length {v.shape[0]}, expected {a.n}")
            if a.l != self.leader.l:
                raise ValueError(f"agent {a.id}: output dimension {a.l} differs from leader's {self.leader.l}")
        if self.w_init is not None:
            self.w_init = [as_vector(v, "w_init") for v in self.w_init]
        if self.eta_init is not None:
            self.eta_init = [as_vector(v, "eta_init") for v in self.eta_init]

    @property
    def mu(self) -> float:
        return self.gains.mu

    @property
    def n_followers(self) -> int:
        return len(self.agents)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented

        def same_list(a, b):
            if a is None or b is None:
                return a is None and b is None
            return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))

        return (self.leader == other.leader and self.agents == other.agents
                and self.schedule == other.schedule and self.gains == other.gains
                and np.array_equal(self.x0, other.x0) and same_list(self.x_init, other.x_init)
                and self.mode == other.mode and self.horizon == other.horizon
                and same_list(self.w_init, other.w_init) and same_list(self.eta_init, other.eta_init))


@dataclass
class CheckItem:
    name: str
    ok: bool
    reason: str
    details: dict = field(default_factory=dict)
    blocking: bool = True

    def as_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "reason": self.reason,
                "blocking": self.blocking, "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class AssumptionReport:
    items: list
    constants: GraphConstants | None = None
    regulator: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(it.ok for it in self.items if it.blocking)

    def failures(self) -> list:
        return [it for it in self.items if it.blocking and not it.ok]

    def get(self, name: str) -> CheckItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [it.as_dict() for it in self.items],
            "graph_constants": self.constants.as_dict() if self.constants else None,
            "regulator": [None if r is None else r.as_dict() for r in self.regulator],
        }

    def format(self) -> str:
        lines = []
        for it in self.items:
            status = "PASS" if it.ok else ("FAIL" if it.blocking else "WARN")
            lines.append(f"[{status}] {it.name}: {it.reason}")
        if self.constants is not None:
            c = self.constants
            lines.append(f"graph constants: delta={c.delta:g} lambda_max={c.lambda_max:.10g} "
                         f"lambda_min={c.lambda_min:.10g} mu_max={c.mu_max:.10g}")
        return "\n".join(lines)


class AssumptionError(RuntimeError):
    def __init__(self, report: AssumptionReport):
        names = ", ".join(f"{it.name} ({it.reason})" for it in report.failures())
        super().__init__(f"scenario failed checks: {names}")
        self.report = report


def check_scenario(s: Scenario, mode: str | None = None) -> AssumptionReport:
    """Run every applicable pre-simulation check for ``s``.

    ``mode`` defaults to ``s.mode``; regulator and feedback-gain checks are
    only blocking for the closed-loop modes.
    """
    mode = mode or s.mode
    closed_loop = mode in ("state", "output")
    items = []

    d = check_leader(s.leader)
    items.append(CheckItem("leader", d.ok, d.reason, d.details))

    for a in s.agents:
        ok = check_positive_system(a.A, a.B, a.C)
        bad = [k for k in "ABC" if not is_nonnegative(getattr(a, k))]
        reason = ("A, B, C nonnegative" if ok else
                  f"not a positive system: {', '.join(bad)} has negative entries")
        items.append(CheckItem(f"positivity[{a.id}]", ok, reason))

    graphs_ok = True
    for p, g in enumerate(s.schedule.family, start=1):
        d = check_assumption_graph(g)
        graphs_ok &= d.ok
        items.append(CheckItem(f"connectivity[{p}]", d.ok, d.reason, d.details))

    constants = None
    if graphs_ok:
        constants = graph_constants(s.schedule)
        ok = validate_mu(s.mu, constants)
        reason = (f"0 < mu={s.mu:g} < min(1/delta, 2/lambda_max)={constants.mu_max:.10g}" if ok else
                  f"mu={s.mu:g} outside the admissible interval (0, {constants.mu_max:.10g})")
        items.append(CheckItem("observer_gain_bound", ok, reason, constants.as_dict()))
    else:
        items.append(CheckItem("observer_gain_bound", False,
                               "cannot bound mu: a graph fails the connectivity check"))

    bad_init = [a.id for a, v in zip(s.agents, s.x_init) if v.min() < 0]
    if s.x0.min() < 0:
        bad_init.insert(0, 0)
    items.append(CheckItem("initial_conditions", not bad_init,
                           "all initial states nonnegative" if not bad_init else
                           f"negative initial state at nodes {bad_init}"))
    nonzero = []
    if s.w_init is not None and any(np.any(v != 0) for v in s.w_init):
        nonzero.append("w")
    if s.eta_init is not None and any(np.any(v != 0) for v in s.eta_init):
        nonzero.append("eta")
    items.append(CheckItem("zero_observer_initialization", not nonzero,
                           "observer and compensator start at zero" if not nonzero else
                           f"nonzero initial {' and '.join(nonzero)} (outside the positivity and convergence guarantees)"))

    regulator = []
    for a, g in zip(s.agents, s.gains.agents):
        sol = solve_regulator(a, s.leader)
        regulator.append(sol)
        if not sol.solvable:
            reason = f"regulator equations unsolvable (residual {sol.residual:.3g})"
        elif not sol.nonneg_ok:
            reason = "regulator equations have no nonnegative solution found"
        else:
            reason = f"nonnegative solution, residual {sol.residual:.3g}"
        items.append(CheckItem(f"regulator[{a.id}]", sol.accepted, reason,
                               {"residual": sol.residual}, blocking=closed_loop))

        if g.K1 is None:
            items.append(CheckItem(f"state_gain[{a.id}]", False, "K1 missing", blocking=closed_loop))
        else:
            d = verify_state_gain(a.A, a.B, g.K1)
            ok = d.ok and bool(np.all(g.K1 <= DEFAULT_TOL))
            reason = d.reason if d.ok and ok else (d.reason if not d.ok else "K1 has positive entries")
            items.append(CheckItem(f"state_gain[{a.id}]", ok, reason, d.details, blocking=closed_loop))

        if g.K2 is None:
            items.append(CheckItem(f"feedforward_gain[{a.id}]", False, "K2 missing", blocking=closed_loop))
        else:
            ok = bool(g.K2.min() >= -DEFAULT_TOL)
            items.append(CheckItem(
                f"feedforward_gain[{a.id}]", ok,
                "K2 nonnegative" if ok else f"K2 has negative entries (min {g.K2.min():.3g})",
                {"K2": g.K2}, blocking=False))

        if g.K3 is not None:
            d = verify_observer_gain(a.A, a.C, g.K3)
            ok = d.ok and bool(np.all(g.K3 >= -DEFAULT_TOL))
            reason = d.reason if not d.ok or ok else "K3 has negative entries"
            items.append(CheckItem(f"output_injection_gain[{a.id}]", ok, reason, d.details))
        elif mode == "output":
            items.append(CheckItem(f"output_injection_gain[{a.id}]", False, "K3 missing"))

    return AssumptionReport(items=items, constants=constants, regulator=regulator)


def complete_gains(s: Scenario, synthesize: bool = True) -> Scenario:
    """Fill missing ``K1``/``K3`` by synthesis and missing ``K2`` from the regulator solution.

    Mutates and returns ``s``. ``K3`` synthesis failures only raise in output
    mode; otherwise the gain stays missing with a warning.
    """
    for a, g in zip(s.agents, s.gains.agents):
        if g.K1 is None and synthesize:
            try:
                g.K1 = synthesize_state_gain(a.A, a.B)
            except SynthesisInfeasible as exc:
                raise SynthesisInfeasible(f"agent {a.id}: state gain: {exc}", exc.best_margin) from exc
            g.provenance["K1"] = "synthesized"
        if g.K3 is None and synthesize:
            try:
                g.K3 = synthesize_observer_gain(a.A, a.C)
                g.provenance["K3"] = "synthesized"
            except SynthesisInfeasible as exc:
                if s.mode == "output":
                    raise SynthesisInfeasible(f"agent {a.id}: output injection gain: {exc}",
                                              exc.best_margin) from exc
                warnings.warn(f"agent {a.id}: no output injection gain ({exc})", RuntimeWarning)
        if g.K2 is None and g.K1 is not None:
            sol = solve_regulator(a, s.leader)
            if sol.accepted:
                g.K2 = compute_feedforward_gain(sol, g.K1)
                g.provenance["K2"] = "synthesized"
    return s


def schedule_constants(schedule: GraphSchedule) -> GraphConstants | None:
    try:
        return graph_constants(schedule)
    except GraphError:
        return None
