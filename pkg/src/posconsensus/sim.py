"""Synchronous round engine and trace diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphSchedule
from .protocol import observer_step, output_feedback_step, state_feedback_control
from .scenario import AssumptionError, AssumptionReport, Scenario, check_scenario

POSITIVITY_TOL = 1e-12
DEFAULT_THRESHOLD = 1e-3


@dataclass
class SimulationTrace:
    """Time-indexed record of one run.

    State-like arrays have ``horizon + 1`` rows, inputs have ``horizon``.
    Per-agent arrays are stored in lists since state sizes may differ.
    """

    mode: str
    sigma: np.ndarray                  # (H+1,)
    x0: np.ndarray                     # (H+1, n0)
    y0: np.ndarray                     # (H+1, l)
    x: list                            # N arrays (H+1, n_i)
    w: np.ndarray                      # (H+1, N, n0)
    u: list                            # N arrays (H, m_i)
    y: np.ndarray                      # (H+1, N, l)
    eta: list | None = None            # N arrays (H+1, n_i), output mode only
    report: AssumptionReport | None = field(default=None, repr=False)
    outside_hypotheses: bool = False

    @property
    def horizon(self) -> int:
        return self.x0.shape[0] - 1

    @property
    def n_followers(self) -> int:
        return len(self.x)

    @property
    def e(self) -> np.ndarray:
        """Tracking errors ``y_i - y0``, shape (H+1, N, l)."""
        return self.y - self.y0[:, None, :]

    def observer_error(self) -> np.ndarray:
        """``x0 - w_i``, shape (H+1, N, n0)."""
        return self.x0[:, None, :] - self.w

    def tracking_error_norms(self) -> np.ndarray:
        """``max_i ||e_i(k)||_inf`` per step."""
        return np.abs(self.e).max(axis=(1, 2))

    def observer_error_norms(self) -> np.ndarray:
        return np.abs(self.observer_error()).max(axis=(1, 2))


def switching_index(s: GraphSchedule, k: int) -> int:
    return s.sigma(k)


def run_scenario(s: Scenario, override: bool = False, pin_observer: bool = False) -> SimulationTrace:
    """Simulate ``s`` for ``s.horizon`` steps.

    Every step reads the active graph, computes all inputs from time-``k``
    values, then advances leader, plants, observers and compensators together.
    Nothing is clamped: positivity is checked afterwards, not enforced.

    Parameters
    ----------
    override : bool
        Run even if the pre-run checks fail (for negative testing); the trace
        is then flagged ``outside_hypotheses``.
    pin_observer : bool
        Diagnostic hook forcing every ``w_i(k)`` to the leader state ``x0(k)``.

    Raises
    ------
    AssumptionError
        If a blocking check fails and ``override`` is false.
    """
    report = check_scenario(s)
    if not report.ok and not override:
        raise AssumptionError(report)

    H, N = s.horizon, s.n_followers
    A0 = s.leader.A0
    n0 = s.leader.n
    mu = s.mu
    agents, gains = s.agents, s.gains.agents
    mode = s.mode
    if mode != "observer":
        missing = [a.id for a, g in zip(agents, gains) if g.K1 is None or g.K2 is None
                   or (mode == "output" and g.K3 is None)]
        if missing:
            raise ValueError(f"agents {missing} lack the gains needed for {mode} feedback")

    sigma = np.array([s.schedule.sigma(k) for k in range(H + 1)], dtype=int)
    x0 = np.empty((H + 1, n0))
    x = [np.empty((H + 1, a.n)) for a in agents]
    w = np.empty((H + 1, N, n0))
    u = [np.empty((H, a.m)) for a in agents]
    eta = [np.empty((H + 1, a.n)) for a in agents] if mode == "output" else None

    x0[0] = s.x0
    for i in range(N):
        x[i][0] = s.x_init[i]
        w[0, i] = s.w_init[i] if s.w_init is not None else 0.0
        if eta is not None:
            eta[i][0] = s.eta_init[i] if s.eta_init is not None else 0.0
    if pin_observer:
        w[0] = x0[0]

    adjacency = [g.adjacency() for g in s.schedule.family]
    for k in range(H):
        a = adjacency[sigma[k] - 1]
        for i, (agent, g) in enumerate(zip(agents, gains)):
            if mode == "state":
                u[i][k] = state_feedback_control(g.K1, g.K2, x[i][k], w[k, i])
            elif mode == "output":
                yk = agent.C @ x[i][k]
                u[i][k], eta[i][k + 1] = output_feedback_step(
                    g.K1, g.K2, g.K3, agent, eta[i][k], w[k, i], yk)
            else:
                u[i][k] = 0.0
        x0[k + 1] = A0 @ x0[k]
        for i, agent in enumerate(agents):
            x[i][k + 1] = agent.A @ x[i][k] + agent.B @ u[i][k]
            node = i + 1
            neighbours = [(w[k, j - 1], a[node, j]) for j in range(1, N + 1)
                          if j != node and a[node, j] != 0]
            leader = (x0[k], a[node, 0]) if a[node, 0] != 0 else None
            w[k + 1, i] = observer_step(w[k, i], neighbours, leader, mu, A0)
        if pin_observer:
            w[k + 1] = x0[k + 1]

    y0 = x0 @ s.leader.C0.T
    y = np.stack([x[i] @ agents[i].C.T for i in range(N)], axis=1)
    return SimulationTrace(mode=mode, sigma=sigma, x0=x0, y0=y0, x=x, w=w, u=u, y=y, eta=eta,
                           report=report, outside_hypotheses=not report.ok)


@dataclass
class PositivityReport:
    min_entry: float
    violations: list                   # (step, agent, variable, component)
    eta_min: float | None = None
    eta_bound_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def positivity_report(t: SimulationTrace, tol: float = POSITIVITY_TOL) -> PositivityReport:
    """Scan plant states and observer estimates for entries below ``-tol``.

    Compensator states are reported separately: only ``eta_i <= x_i`` is
    checked for them.
    """
    violations = []
    mins = []
    for i in range(t.n_followers):
        for name, arr in (("x", t.x[i]), ("w", t.w[:, i, :])):
            mins.append(arr.min())
            for k, c in zip(*np.nonzero(arr < -tol)):
                violations.append((int(k), i + 1, name, int(c)))
    violations.sort()
    eta_min, eta_bad = None, []
    if t.eta is not None:
        eta_min = float(min(e.min() for e in t.eta))
        for i, (e, xi) in enumerate(zip(t.eta, t.x)):
            for k, c in zip(*np.nonzero(e > xi + tol)):
                eta_bad.append((int(k), i + 1, "eta", int(c)))
    return PositivityReport(min_entry=float(min(mins)), violations=violations,
                            eta_min=eta_min, eta_bound_violations=sorted(eta_bad))


@dataclass
class ConvergenceReport:
    converged: bool
    first_step: int | None
    tail_error: float


def convergence_report(t: SimulationTrace, threshold: float = DEFAULT_THRESHOLD) -> ConvergenceReport:
    """First step after which the error stays below ``threshold``, plus the tail error.

    The error is ``max_i ||e_i||_inf`` in closed-loop modes and the observer
    error ``max_i ||x0 - w_i||_inf`` in observer-only mode. The tail covers the
    last 10% of recorded steps.
    """
    errs = t.observer_error_norms() if t.mode == "observer" else t.tracking_error_norms()
    return convergence_from_errors(errs, threshold)


def convergence_from_errors(errs: np.ndarray, threshold: float) -> ConvergenceReport:
    errs = np.asarray(errs, dtype=float)
    above = np.nonzero(errs >= threshold)[0]
    if above.size == 0:
        first = 0
    elif above[-1] == errs.size - 1:
        first = None
    else:
        first = int(above[-1] + 1)
    tail = errs[-max(1, math.ceil(0.1 * errs.size)):]
    return ConvergenceReport(converged=first is not None, first_step=first,
                             tail_error=float(tail.max()))
