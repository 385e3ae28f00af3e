import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import A0, G1, K1, K3
from posconsensus.graph import follower_submatrix
from posconsensus.linalg import DimensionError, spectral_radius
from posconsensus.protocol import (
    compact_observer_matrix,
    leader_input_term,
    observer_step,
    output_feedback_step,
    stacked_observer_step,
    state_feedback_control,
)
from posconsensus.regulator import compute_feedforward_gain, solve_regulator
from test_graph import admissible_graphs

K21 = np.array([[0.25, 0.5]])
V = np.array([2.0, 3.0])


def test_observer_step_without_links():
    assert np.allclose(observer_step(V, [], None, 0.3, A0), A0 @ V)


def test_observer_step_single_leader_link():
    assert np.allclose(observer_step(np.zeros(2), [], (V, 1.0), 0.5, A0), 0.5 * A0 @ V)


def test_observer_step_consensus_invariant():
    out = observer_step(V, [(V, 1.0), (V, 1.0)], (V, 1.0), 0.3, A0)
    assert np.allclose(out, A0 @ V)


def test_observer_step_dimension_mismatch():
    with pytest.raises(DimensionError):
        observer_step(V, [(np.ones(3), 1.0)], None, 0.3, A0)
    with pytest.raises(DimensionError):
        observer_step(np.ones(3), [], None, 0.3, A0)


def test_compact_matrix_examples():
    assert np.allclose(compact_observer_matrix([[1.0]], 0.5, A0), 0.5 * A0)
    assert np.allclose(compact_observer_matrix(np.eye(3), 0.0, A0), np.kron(np.eye(3), A0))


def test_compact_matrix_spectrum_for_first_graph():
    M = compact_observer_matrix(follower_submatrix(G1), 0.3, A0)
    # A0 is defective, so computed eigenvalues carry ~sqrt(eps) error
    assert spectral_radius(M) == pytest.approx(1 - 0.3 * (2 - np.sqrt(3)), abs=1e-7)
    eig = np.linalg.eigvals(M)
    assert np.min(np.abs(eig - (1 - 0.3 * (2 + np.sqrt(3))))) < 1e-7


def test_compact_form_matches_stepwise_on_example():
    rng = np.random.default_rng(1)
    a = G1.adjacency()
    w = rng.uniform(0, 5, (3, 2))
    x0 = rng.uniform(0, 5, 2)
    stepwise = np.concatenate([
        observer_step(w[i], [(w[j - 1], a[i + 1, j]) for j in range(1, 4) if a[i + 1, j]],
                      (x0, a[i + 1, 0]) if a[i + 1, 0] else None, 0.3, A0)
        for i in range(3)])
    stacked = stacked_observer_step(w.reshape(-1), follower_submatrix(G1), G1.pinned(), 0.3, A0, x0)
    assert np.max(np.abs(stepwise - stacked)) < 1e-12


def test_leader_input_term_only_reaches_pinned_agents():
    term = leader_input_term([0, 1, 0], 0.3, A0, V).reshape(3, 2)
    assert np.allclose(term[[0, 2]], 0)
    assert np.allclose(term[1], 0.3 * A0 @ V)


def test_state_feedback_examples():
    assert np.allclose(state_feedback_control(K1[0], K21, np.zeros(2), np.zeros(2)), 0)
    assert state_feedback_control(K1[0], K21, [2, 0], [1, 1]) == pytest.approx([-0.25], abs=1e-15)


def test_state_feedback_dimension_mismatch():
    with pytest.raises(DimensionError):
        state_feedback_control(K1[0], K21, [1, 2, 3], [1, 1])


def test_output_feedback_examples(agents):
    u, eta = output_feedback_step(K1[0], K21, K3[0], agents[0], np.zeros(2), np.zeros(2), [0.0])
    assert np.allclose(u, 0) and np.allclose(eta, 0)
    u, eta = output_feedback_step(K1[0], K21, K3[0], agents[0], np.zeros(2), [1, 1], [0.0])
    assert u == pytest.approx([0.75], abs=1e-15)
    assert np.allclose(eta, [0.75, 0], atol=1e-15)


def test_output_feedback_with_exact_estimate_equals_state_feedback(agents):
    x, w = np.array([1.5, 2.0]), np.array([0.3, 0.7])
    u, _ = output_feedback_step(K1[1], K21, K3[1], agents[1], x, w, agents[1].C @ x)
    assert np.allclose(u, state_feedback_control(K1[1], K21, x, w))


@pytest.mark.parametrize("idx", range(3))
def test_steady_state_manifold_is_invariant(idx, agents, leader):
    agent = agents[idx]
    sol = solve_regulator(agent, leader)
    K2 = compute_feedforward_gain(sol, K1[idx])
    x0 = np.array([3.0, 1.0])
    x = sol.X @ x0
    u = state_feedback_control(K1[idx], K2, x, x0)
    assert np.allclose(u, sol.U @ x0, atol=1e-12)
    assert np.allclose(agent.A @ x + agent.B @ u, sol.X @ A0 @ x0, atol=1e-12)


@pytest.mark.parametrize("idx", range(3))
def test_estimation_error_is_autonomous(idx, agents):
    agent = agents[idx]
    rng = np.random.default_rng(idx)
    K2 = rng.uniform(0, 1, (1, 2))
    x, eta = rng.uniform(0, 5, 2), np.zeros(2)
    F = agent.A - K3[idx] @ agent.C
    for _ in range(30):
        w = rng.uniform(0, 5, 2)
        u, eta_next = output_feedback_step(K1[idx], K2, K3[idx], agent, eta, w, agent.C @ x)
        x_next = agent.A @ x + agent.B @ u
        assert np.allclose(x_next - eta_next, F @ (x - eta), atol=1e-12)
        x, eta = x_next, eta_next


@settings(max_examples=60, deadline=None)
@given(admissible_graphs(max_n=5), st.integers(1, 3), st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
def test_stepwise_equals_stacked(g, n0, frac, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, (n0, n0))
    H = follower_submatrix(g)
    mu = frac / max(np.diag(H).max(), 1)
    a = g.adjacency()
    N = g.n_followers
    w = rng.uniform(0, 5, (N, n0))
    x0 = rng.uniform(0, 5, n0)
    stepwise = np.concatenate([
        observer_step(w[i], [(w[j - 1], a[i + 1, j]) for j in range(1, N + 1) if a[i + 1, j]],
                      (x0, a[i + 1, 0]) if a[i + 1, 0] else None, mu, A)
        for i in range(N)])
    stacked = stacked_observer_step(w.reshape(-1), H, g.pinned(), mu, A, x0)
    assert np.max(np.abs(stepwise - stacked)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(admissible_graphs(max_n=5), st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
def test_observer_step_preserves_nonnegativity(g, frac, seed):
    rng = np.random.default_rng(seed)
    H = follower_submatrix(g)
    mu = frac / np.diag(H).max()
    a = g.adjacency()
    N = g.n_followers
    w = rng.uniform(0, 5, (N, 2)) * (rng.uniform(size=(N, 2)) < 0.5)
    x0 = rng.uniform(0, 5, 2)
    for i in range(N):
        out = observer_step(w[i], [(w[j - 1], a[i + 1, j]) for j in range(1, N + 1) if a[i + 1, j]],
                            (x0, a[i + 1, 0]) if a[i + 1, 0] else None, mu, A0)
        assert np.all(out >= -1e-12)
