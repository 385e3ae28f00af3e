"""Regulator equations and the feedforward gain built from them.

For follower ``(A, B, C)`` and leader ``(A0, C0)`` we look for ``X >= 0``,
``U >= 0`` with ``A X + B U - X A0 = 0`` and ``C X = C0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .linalg import DEFAULT_TOL, DimensionError, as_matrix, solve_linear_least_squares
from .systems import AgentModel, LeaderModel

RESIDUAL_TOL = 1e-10


@dataclass
class RegulatorSolution:
    X: np.ndarray
    U: np.ndarray
    residual: float
    nonneg_ok: bool

    @property
    def solvable(self) -> bool:
        return self.residual < RESIDUAL_TOL

    @property
    def accepted(self) -> bool:
        return self.solvable and self.nonneg_ok

    def as_dict(self) -> dict:
        return {"X": self.X.tolist(), "U": self.U.tolist(), "residual": self.residual,
                "nonneg_ok": self.nonneg_ok, "solvable": self.solvable}


def regulator_system(agent: AgentModel, leader: LeaderModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (column-major) linear system ``M [vec X; vec U] = rhs``."""
    if agent.l != leader.l:
        raise DimensionError(
            f"agent {agent.id}: output dimension {agent.l} differs from leader's {leader.l}")
    n, m, n0 = agent.n, agent.m, leader.n
    I0 = np.eye(n0)
    top = np.hstack([np.kron(I0, agent.A) - np.kron(leader.A0.T, np.eye(n)),
                     np.kron(I0, agent.B)])
    bottom = np.hstack([np.kron(I0, agent.C), np.zeros((agent.l * n0, m * n0))])
    M = np.vstack([top, bottom])
    rhs = np.concatenate([np.zeros(n * n0), leader.C0.reshape(-1, order="F")])
    return M, rhs


def regulator_residual(agent: AgentModel, leader: LeaderModel, X, U) -> float:
    """2-norm of the stacked residual of both regulator equations."""
    X, U = as_matrix(X, "X"), as_matrix(U, "U")
    r1 = agent.A @ X + agent.B @ U - X @ leader.A0
    r2 = agent.C @ X - leader.C0
    return float(np.sqrt(np.sum(r1 ** 2) + np.sum(r2 ** 2)))


def _unpack(z: np.ndarray, n: int, m: int, n0: int):
    X = z[: n * n0].reshape((n, n0), order="F")
    U = z[n * n0:].reshape((m, n0), order="F")
    return X, U


def solve_regulator(agent: AgentModel, leader: LeaderModel) -> RegulatorSolution:
    """Minimum-norm solve, with a nonnegative least-squares retry.

    An unsolvable system is reported through ``residual`` rather than raised.
    """
    M, rhs = regulator_system(agent, leader)
    n, m, n0 = agent.n, agent.m, leader.n
    z, _ = solve_linear_least_squares(M, rhs)
    X, U = _unpack(z, n, m, n0)
    residual = regulator_residual(agent, leader, X, U)
    nonneg = bool(min(X.min(), U.min()) >= -DEFAULT_TOL)
    if residual < RESIDUAL_TOL and not nonneg:
        z_nn, _ = nnls(M, rhs)
        Xn, Un = _unpack(z_nn, n, m, n0)
        res_nn = regulator_residual(agent, leader, Xn, Un)
        if res_nn < RESIDUAL_TOL:
            X, U, residual, nonneg = Xn, Un, res_nn, True
    return RegulatorSolution(X=X, U=U, residual=residual, nonneg_ok=nonneg)


def compute_feedforward_gain(sol: RegulatorSolution, K1) -> np.ndarray:
    """``K2 = U - K1 X``; warns when the result has negative entries."""
    K1 = as_matrix(K1, "K1")
    if K1.shape != (sol.U.shape[0], sol.X.shape[0]):
        raise DimensionError(f"K1 shape {K1.shape}, expected {(sol.U.shape[0], sol.X.shape[0])}")
    K2 = sol.U - K1 @ sol.X
    if K2.min() < -DEFAULT_TOL:
        warnings.warn(f"feedforward gain has negative entries (min {K2.min():.3g}); "
                      "follower positivity is no longer guaranteed", RuntimeWarning, stacklevel=2)
    return K2
