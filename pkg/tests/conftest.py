import numpy as np
import pytest

from posconsensus.graph import Digraph, GraphSchedule
from posconsensus.scenario_file import load_reference_example
from posconsensus.systems import AgentModel, LeaderModel

A0 = np.array([[1.0, 0.5], [0.0, 1.0]])
C0 = np.array([[1.0, 1.0]])

AGENTS = [
    (np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([[1.0], [0.0]]), np.array([[2.0, 0.0]])),
    (np.array([[1.0, 0.0], [0.3, 0.7]]), np.array([[1.0], [1.0]]), np.array([[2.0, 0.0]])),
    (np.array([[1.0, 0.0], [0.5, 0.8]]), np.array([[1.0], [2.5]]), np.array([[4.0, 0.0]])),
]
K1 = [np.array([[-0.5, 0.0]]), np.array([[-0.3, 0.0]]), np.array([[-0.2, 0.0]])]
K3 = [np.array([[0.3], [0.3]]), np.array([[0.5], [0.1]]), np.array([[0.1], [0.1]])]

G1 = Digraph.from_edges(3, directed=[(0, 2)], undirected=[(1, 2), (2, 3)])
G2 = Digraph.from_edges(3, directed=[(0, 3)], undirected=[(1, 2), (2, 3), (1, 3)])


@pytest.fixture
def leader():
    return LeaderModel(A0, C0)


@pytest.fixture
def agents():
    return [AgentModel(A, B, C, id=i + 1) for i, (A, B, C) in enumerate(AGENTS)]


@pytest.fixture
def schedule():
    return GraphSchedule(family=(G1, G2), kind="periodic", block=20)


@pytest.fixture
def example():
    return load_reference_example()


def random_stabilizable_instance(rng, max_n=4, max_m=3):
    """Nonnegative (A, B) that some nonpositive K makes nonnegative and Schur.

    Draws a nonnegative Schur closed loop M, nonnegative B and nonpositive K,
    then sets A = M - B K (which is nonnegative since -B K >= 0).
    """
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.7)
    rho = np.max(np.abs(np.linalg.eigvals(M)))
    if rho > 0:
        M *= rng.uniform(0.1, 0.9) / rho
    B = rng.uniform(0, 2, (n, m)) * (rng.uniform(size=(n, m)) < 0.8)
    K = -rng.uniform(0, 2, (m, n)) * (rng.uniform(size=(m, n)) < 0.8)
    return M - B @ K, B, K, M


def random_leader_matrix(rng, n0):
    """Nonnegative matrix scaled to spectral radius exactly 1."""
    while True:
        M = rng.uniform(0, 1, (n0, n0)) * (rng.uniform(size=(n0, n0)) < 0.7)
        rho = np.max(np.abs(np.linalg.eigvals(M)))
        if rho > 1e-3:
            return M / rho


def observer_scenario(family, A0_, mu, x0, horizon, kind="periodic", block=3, w_init=None):
    """Observer-only scenario over ``family`` with inert placeholder agents."""
    from posconsensus.scenario import Scenario
    from posconsensus.systems import AgentGains, GainSet

    A0_ = np.asarray(A0_, dtype=float)
    n0 = A0_.shape[0]
    C0_ = np.ones((1, n0))
    N = family[0].n_followers
    agents = [AgentModel(0.5 * np.eye(n0), np.ones((n0, 1)), C0_, id=i + 1) for i in range(N)]
    return Scenario(
        leader=LeaderModel(A0_, C0_), agents=agents,
        schedule=GraphSchedule(family=tuple(family), kind=kind, block=block),
        gains=GainSet([AgentGains() for _ in range(N)], mu),
        x0=x0, x_init=[np.zeros(n0)] * N, mode="observer", horizon=horizon, w_init=w_init)


def stacked_observer_trace(s):
    """Iterate the stacked observer recursion for an observer-only scenario."""
    from posconsensus.graph import follower_submatrix
    from posconsensus.protocol import stacked_observer_step

    N, n0 = s.n_followers, s.leader.n
    w = np.zeros(N * n0) if s.w_init is None else np.concatenate(s.w_init)
    x0 = np.array(s.x0)
    out = [w.reshape(N, n0)]
    for k in range(s.horizon):
        g = s.schedule.graph_at(k)
        w = stacked_observer_step(w, follower_submatrix(g), g.pinned(), s.mu, s.leader.A0, x0)
        x0 = s.leader.A0 @ x0
        out.append(w.reshape(N, n0))
    return np.array(out)


def random_admissible_graph(rng, n):
    """Leader-pinned graph on ``n`` followers with a connected undirected follower part."""
    undirected = [(int(rng.integers(1, v)), v) for v in range(2, n + 1)]
    for _ in range(int(rng.integers(0, n + 1))):
        a, b = rng.integers(1, n + 1, size=2)
        if a != b:
            undirected.append((int(a), int(b)))
    pinned = rng.choice(np.arange(1, n + 1), size=int(rng.integers(1, n + 1)), replace=False)
    return Digraph.from_edges(n, directed=[(0, int(p)) for p in pinned], undirected=undirected)


def random_admissible_family(rng, n, size):
    return tuple(random_admissible_graph(rng, n) for _ in range(size))
