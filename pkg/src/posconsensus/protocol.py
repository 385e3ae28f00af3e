"""Per-agent update rules: distributed positive observer and the two feedback laws."""
from __future__ import annotations

import numpy as np

from .linalg import DimensionError, as_matrix, as_vector
from .systems import AgentModel


def observer_step(w_i, neighbor_ws, leader_w0, mu: float, A0) -> np.ndarray:
    """One observer update for agent ``i``.

    Parameters
    ----------
    w_i : array_like
        Current estimate held by agent ``i``.
    neighbor_ws : iterable of (vector, weight)
        Follower neighbours' estimates with adjacency weights ``a_ij``.
    leader_w0 : (vector, weight) or None
        Leader state ``x0(k)`` and the pinning weight ``a_i0``.
    mu : float
        Coupling gain.
    A0 : array_like
        Leader system matrix.

    Returns
    -------
    ndarray
        ``A0 (w_i + mu * sum_j a_ij (w_j - w_i))``.
    """
    A0 = as_matrix(A0, "A0")
    w_i = as_vector(w_i, "w_i")
    if w_i.shape[0] != A0.shape[0]:
        raise DimensionError(f"w_i has length {w_i.shape[0]}, expected {A0.shape[0]}")
    links = list(neighbor_ws)
    if leader_w0 is not None:
        links.append(leader_w0)
    disagreement = np.zeros_like(w_i)
    for w_j, a_ij in links:
        w_j = as_vector(w_j, "w_j")
        if w_j.shape != w_i.shape:
            raise DimensionError(f"neighbour estimate has length {w_j.shape[0]}, expected {w_i.shape[0]}")
        disagreement += a_ij * (w_j - w_i)
    return A0 @ (w_i + mu * disagreement)


def compact_observer_matrix(Hp, mu: float, A0) -> np.ndarray:
    """``(I_N - mu Hp) kron A0``, the stacked observer system matrix."""
    Hp = as_matrix(Hp, "Hp")
    if Hp.shape[0] != Hp.shape[1]:
        raise DimensionError(f"Hp must be square, got {Hp.shape}")
    return np.kron(np.eye(Hp.shape[0]) - mu * Hp, as_matrix(A0, "A0"))


def leader_input_term(pinned, mu: float, A0, w0) -> np.ndarray:
    """``mu (diag(pinned) kron A0)(1_N kron w0)``."""
    pinned = np.asarray(pinned, dtype=float).reshape(-1)
    A0 = as_matrix(A0, "A0")
    return mu * np.kron(pinned, A0 @ as_vector(w0, "w0"))


def stacked_observer_step(w_stack, Hp, pinned, mu: float, A0, w0) -> np.ndarray:
    return compact_observer_matrix(Hp, mu, A0) @ np.asarray(w_stack, dtype=float) \
        + leader_input_term(pinned, mu, A0, w0)


def state_feedback_control(K1, K2, x_i, w_i) -> np.ndarray:
    K1, K2 = as_matrix(K1, "K1"), as_matrix(K2, "K2")
    x_i, w_i = as_vector(x_i, "x_i"), as_vector(w_i, "w_i")
    if K1.shape[1] != x_i.shape[0] or K2.shape[1] != w_i.shape[0] or K1.shape[0] != K2.shape[0]:
        raise DimensionError(
            f"gain shapes K1 {K1.shape}, K2 {K2.shape} do not fit x {x_i.shape}, w {w_i.shape}")
    return K1 @ x_i + K2 @ w_i


def output_feedback_step(K1, K2, K3, agent: AgentModel, eta_i, w_i, y_i):
    """Control input and next compensator state for the output-feedback law.

    ``u = K1 eta + K2 w`` and ``eta+ = (A - K3 C) eta + B u + K3 y``; the
    compensator update uses the ``u`` computed in this same step.
    """
    K3 = as_matrix(K3, "K3")
    y_i = as_vector(y_i, "y_i")
    if K3.shape != (agent.n, agent.l) or y_i.shape[0] != agent.l:
        raise DimensionError(f"K3 {K3.shape} / y {y_i.shape} do not fit agent {agent.id}")
    u = state_feedback_control(K1, K2, eta_i, w_i)
    eta = as_vector(eta_i, "eta_i")
    eta_next = (agent.A - K3 @ agent.C) @ eta + agent.B @ u + K3 @ y_i
    return u, eta_next
