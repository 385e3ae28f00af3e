"""Agent and leader models, positivity checks, and feedback gain design.

Gain synthesis relies on the linear-programming characterisation of
nonnegative Schur matrices: a nonnegative ``M`` satisfies ``rho(M) <= r``
when some ``d >> 0`` has ``M d <= r d``. Writing ``K = Y diag(d)^-1`` turns
``A + B K >= 0``, ``K <= 0`` and ``(A + B K) d <= r d`` into constraints that
are linear in ``(d, Y)``, so for a fixed rate ``r`` the search is a single LP.
Bisection over ``r`` then gives the gain with the smallest certified rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .graph import Diagnosis
from .linalg import DEFAULT_TOL, DimensionError, as_matrix, is_nonnegative, spectral_radius

SYNTHESIS_MARGIN = 0.05
LEADER_RADIUS_TOL = 1e-8


class ModelError(ValueError):
    pass


class SynthesisInfeasible(RuntimeError):
    """No nonpositive gain was found that makes the closed loop nonnegative and Schur."""

    def __init__(self, message: str, best_margin: float):
        super().__init__(message)
        self.best_margin = best_margin


@dataclass(frozen=True, eq=False)
class AgentModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    id: int = 0

    def __post_init__(self):
        A, B, C = as_matrix(self.A, "A"), as_matrix(self.B, "B"), as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"agent {self.id}: A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"agent {self.id}: B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"agent {self.id}: C has {C.shape[1]} columns, expected {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AgentModel):
            return NotImplemented
        return self.id == other.id and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABC")


@dataclass(frozen=True, eq=False)
class LeaderModel:
    A0: np.ndarray
    C0: np.ndarray

    def __post_init__(self):
        A0, C0 = as_matrix(self.A0, "A0"), as_matrix(self.C0, "C0")
        if A0.shape[0] != A0.shape[1]:
            raise DimensionError(f"A0 must be square, got {A0.shape}")
        if C0.shape[1] != A0.shape[0]:
            raise DimensionError(f"C0 has {C0.shape[1]} columns, expected {A0.shape[0]}")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "C0", C0)

    @property
    def n(self) -> int:
        return self.A0.shape[0]

    @property
    def l(self) -> int:
        return self.C0.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LeaderModel):
            return NotImplemented
        return np.array_equal(self.A0, other.A0) and np.array_equal(self.C0, other.C0)


def _opt_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(eq=False)
class AgentGains:
    """Per-agent gains: state feedback ``K1``, feedforward ``K2``, output injection ``K3``.

    ``provenance`` maps each gain name to ``"user"`` or ``"synthesized"``.
    """

    K1: np.ndarray | None = None
    K2: np.ndarray | None = None
    K3: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("K1", "K2", "K3"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, as_matrix(val, name))
                self.provenance.setdefault(name, "user")

    def __eq__(self, other):
        if not isinstance(other, AgentGains):
            return NotImplemented
        return all(_opt_equal(getattr(self, k), getattr(other, k)) for k in ("K1", "K2", "K3"))


@dataclass(eq=False)
class GainSet:
    agents: list
    mu: float

    def __eq__(self, other):
        if not isinstance(other, GainSet):
            return NotImplemented
        return self.mu == other.mu and self.agents == other.agents


def check_positive_system(A, B, C, tol: float = 0.0) -> bool:
    """Nonnegativity of all three system matrices, which is equivalent to positivity."""
    AgentModel(A, B, C)  # shape validation
    return is_nonnegative(A, tol) and is_nonnegative(B, tol) and is_nonnegative(C, tol)


def check_leader(leader: LeaderModel) -> Diagnosis:
    rho = spectral_radius(leader.A0)
    details = {"spectral_radius": rho, "min_A0": float(leader.A0.min()),
               "min_C0": float(leader.C0.min())}
    if not is_nonnegative(leader.A0):
        return Diagnosis(False, "negativity: A0 has negative entries", details)
    if not is_nonnegative(leader.C0):
        return Diagnosis(False, "negativity: C0 has negative entries", details)
    if abs(rho - 1.0) > LEADER_RADIUS_TOL:
        return Diagnosis(False, f"spectral radius {rho:.10g}, expected 1", details)
    return Diagnosis(True, "A0 >= 0, C0 >= 0, spectral radius 1", details)


def _closed_loop_diagnosis(M: np.ndarray, label: str) -> Diagnosis:
    rho = spectral_radius(M)
    min_entry = float(M.min())
    details = {"closed_loop": M.tolist(), "min_entry": min_entry, "spectral_radius": rho}
    if min_entry < -DEFAULT_TOL:
        return Diagnosis(False, f"{label} has a negative entry ({min_entry:.3g})", details)
    if not rho < 1.0 - DEFAULT_TOL:
        return Diagnosis(False, f"{label} not Schur (spectral radius {rho:.6g})", details)
    return Diagnosis(True, f"{label} nonnegative and Schur (spectral radius {rho:.6g})", details)


def verify_state_gain(A, B, K1) -> Diagnosis:
    A, B, K1 = as_matrix(A, "A"), as_matrix(B, "B"), as_matrix(K1, "K1")
    if K1.shape != (B.shape[1], A.shape[0]):
        raise DimensionError(f"K1 shape {K1.shape}, expected {(B.shape[1], A.shape[0])}")
    return _closed_loop_diagnosis(A + B @ K1, "A + B K1")


def verify_observer_gain(A, C, K3) -> Diagnosis:
    A, C, K3 = as_matrix(A, "A"), as_matrix(C, "C"), as_matrix(K3, "K3")
    if K3.shape != (A.shape[0], C.shape[0]):
        raise DimensionError(f"K3 shape {K3.shape}, expected {(A.shape[0], C.shape[0])}")
    return _closed_loop_diagnosis(A - K3 @ C, "A - K3 C")


def _rate_lp(A: np.ndarray, B: np.ndarray, r: float):
    """Solve the fixed-rate LP; returns ``K`` or ``None`` when infeasible.

    Variables are ``d`` (n) followed by ``Y`` (m x n, row-major).
    """
    n, m = A.shape[0], B.shape[1]
    nv = n + m * n

    def y_index(p, j):
        return n + p * n + j

    rows, rhs = [], []
    # (A d + B Y 1)_i - r d_i <= 0
    for i in range(n):
        row = np.zeros(nv)
        row[:n] = A[i]
        row[i] -= r
        for p in range(m):
            for j in range(n):
                row[y_index(p, j)] += B[i, p]
        rows.append(row)
        rhs.append(0.0)
    # -(A_ij d_j + sum_p B_ip Y_pj) <= 0
    for i in range(n):
        for j in range(n):
            row = np.zeros(nv)
            row[j] = -A[i, j]
            for p in range(m):
                row[y_index(p, j)] = -B[i, p]
            rows.append(row)
            rhs.append(0.0)
    bounds = [(1.0, None)] * n + [(None, 0.0)] * (m * n)
    # mild preference for small gains keeps the LP bounded and the choice deterministic
    cost = np.concatenate([np.ones(n), -1e-6 * np.ones(m * n)])
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    d = res.x[:n]
    Y = res.x[n:].reshape(m, n)
    K = np.minimum(Y / d[None, :], 0.0)
    return _repair_nonnegativity(A, B, K)


def _repair_nonnegativity(A: np.ndarray, B: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Shrink columns of ``K`` toward zero until ``A + B K >= 0`` exactly.

    With ``B >= 0`` and ``K <= 0`` every entry of column ``j`` of ``A + B K``
    grows monotonically as column ``j`` of ``K`` shrinks, so this only undoes
    LP round-off.
    """
    BK = B @ K
    K = K.copy()
    for j in range(K.shape[1]):
        neg = BK[:, j] < 0
        if not np.any(A[neg, j] + BK[neg, j] < 0):
            continue
        t = min(1.0, float(np.min(A[neg, j] / -BK[neg, j])))
        K[:, j] *= t
    return K


def synthesize_state_gain(A, B, margin: float = SYNTHESIS_MARGIN, iters: int = 50) -> np.ndarray:
    """Nonpositive ``K1`` with ``A + B K1`` nonnegative and Schur.

    A zero gain is returned when ``A`` alone already contracts with the
    requested margin. Otherwise bisects on the certified contraction rate and
    returns the gain with the smallest rate found (largest Schur margin). The
    result always passes :func:`verify_state_gain`.

    Raises
    ------
    SynthesisInfeasible
        If no certified rate below ``1 - margin`` exists, or the best gain fails
        verification. ``best_margin`` on the exception carries ``1 - rate``.
    """
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise DimensionError(f"inconsistent shapes A {A.shape}, B {B.shape}")
    if not (is_nonnegative(A) and is_nonnegative(B)):
        raise ModelError("gain synthesis needs nonnegative A and B")

    zero = np.zeros((B.shape[1], A.shape[0]))
    if spectral_radius(A) < 1.0 - margin:
        return zero

    lo, hi = 0.0, float(A.sum(axis=1).max()) + 1.0
    best = _rate_lp(A, B, hi)
    if _rate_lp(A, B, lo) is not None:
        hi = lo
        best = _rate_lp(A, B, lo)
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            K = _rate_lp(A, B, mid)
            if K is None:
                lo = mid
            else:
                hi, best = mid, K
            if hi - lo < 1e-9:
                break
    if best is None:  # pragma: no cover - the upper bracket is always feasible
        raise SynthesisInfeasible("no nonnegative closed loop found", best_margin=-np.inf)
    if hi >= 1.0 - margin:
        raise SynthesisInfeasible(
            f"best certified contraction rate {hi:.6g} leaves margin {1 - hi:.3g} < {margin}",
            best_margin=1.0 - hi)
    diag = verify_state_gain(A, B, best)
    if not diag.ok:
        raise SynthesisInfeasible(f"synthesized gain failed verification: {diag.reason}",
                                  best_margin=1.0 - diag.details["spectral_radius"])
    return best


def synthesize_observer_gain(A, C, margin: float = SYNTHESIS_MARGIN, iters: int = 50) -> np.ndarray:
    """Nonnegative ``K3`` with ``A - K3 C`` nonnegative and Schur, by duality.

    ``A - K3 C = (A^T + C^T (-K3^T))^T``, so the state-gain design on
    ``(A^T, C^T)`` gives ``K3 = -K^T``.
    """
    A, C = as_matrix(A, "A"), as_matrix(C, "C")
    K = synthesize_state_gain(A.T, C.T, margin=margin, iters=iters)
    K3 = np.maximum(-K.T, 0.0)
    diag = verify_observer_gain(A, C, K3)
    if not diag.ok:  # pragma: no cover - guarded by the primal verification
        raise SynthesisInfeasible(f"synthesized gain failed verification: {diag.reason}",
                                  best_margin=1.0 - diag.details["spectral_radius"])
    return K3
