"""Leader-following consensus for discrete-time positive multi-agent systems.

A distributed positive observer shares the leader's state over switching
graphs; state- or output-feedback laws built on it make every follower track
the leader's output while all states stay in the nonnegative orthant.
"""
from .graph import (
    Diagnosis,
    Digraph,
    GraphConstants,
    GraphSchedule,
    check_assumption_graph,
    follower_submatrix,
    graph_constants,
    laplacian,
    validate_mu,
)
from .linalg import DimensionError, is_nonnegative, kron, solve_linear_least_squares, spectral_radius
from .protocol import (
    compact_observer_matrix,
    observer_step,
    output_feedback_step,
    state_feedback_control,
)
from .regulator import RegulatorSolution, compute_feedforward_gain, solve_regulator
from .scenario import AssumptionError, AssumptionReport, Scenario, check_scenario, complete_gains
from .scenario_file import emit_scenario, load_reference_example, loads_scenario, parse_scenario
from .sim import (
    SimulationTrace,
    convergence_report,
    positivity_report,
    run_scenario,
    switching_index,
)
from .systems import (
    AgentGains,
    AgentModel,
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

__all__ = [
    "AgentGains",
    "AgentModel",
    "AssumptionError",
    "AssumptionReport",
    "check_assumption_graph",
    "check_leader",
    "check_positive_system",
    "check_scenario",
    "compact_observer_matrix",
    "complete_gains",
    "compute_feedforward_gain",
    "convergence_report",
    "Diagnosis",
    "Digraph",
    "DimensionError",
    "emit_scenario",
    "follower_submatrix",
    "GainSet",
    "graph_constants",
    "GraphConstants",
    "GraphSchedule",
    "is_nonnegative",
    "kron",
    "laplacian",
    "LeaderModel",
    "load_reference_example",
    "loads_scenario",
    "observer_step",
    "output_feedback_step",
    "parse_scenario",
    "positivity_report",
    "RegulatorSolution",
    "run_scenario",
    "Scenario",
    "SimulationTrace",
    "solve_linear_least_squares",
    "solve_regulator",
    "spectral_radius",
    "state_feedback_control",
    "switching_index",
    "SynthesisInfeasible",
    "synthesize_observer_gain",
    "synthesize_state_gain",
    "validate_mu",
    "verify_observer_gain",
    "verify_state_gain",
]

__version__ = "0.1.0"
