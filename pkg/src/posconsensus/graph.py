"""Leader-rooted communication graphs and switching schedules.

Node 0 is the leader, nodes ``1..N`` are followers. An edge ``(j, i)`` means
node ``i`` receives information from node ``j``; adjacency weights are 0/1.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .linalg import is_nonnegative


@dataclass(frozen=True)
class Diagnosis:
    """Outcome of a check: pass/fail, a human-readable reason and supporting numbers."""

    ok: bool
    reason: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def __bool__(self) -> bool:
        return self.ok


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Digraph:
    n_followers: int
    edges: frozenset

    def __init__(self, n_followers: int, edges):
        n = int(n_followers)
        if n < 1:
            raise GraphError("a graph needs at least one follower")
        normalized = set()
        for e in edges:
            if len(e) != 2:
                raise GraphError(f"edge {e!r} is not a pair")
            j, i = int(e[0]), int(e[1])
            if not (0 <= j <= n and 0 <= i <= n):
                raise GraphError(f"edge ({j}, {i}) references a node outside 0..{n}")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if i == 0:
                raise GraphError(f"edge ({j}, 0) points into the leader")
            normalized.add((j, i))
        object.__setattr__(self, "n_followers", n)
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, n_followers: int, directed=(), undirected=()) -> "Digraph":
        """Build a graph from one-way edges plus follower pairs linked both ways."""
        edges = set(tuple(e) for e in directed)
        for a, b in undirected:
            edges.add((a, b))
            edges.add((b, a))
        return cls(n_followers, edges)

    def adjacency(self) -> np.ndarray:
        """(N+1)x(N+1) matrix with ``a[i, j] = 1`` iff ``(j, i)`` is an edge."""
        n = self.n_followers + 1
        a = np.zeros((n, n))
        for j, i in self.edges:
            a[i, j] = 1.0
        return a

    def pinned(self) -> np.ndarray:
        """Leader-link indicators ``a_{i0}`` for followers ``1..N``."""
        return self.adjacency()[1:, 0]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def laplacian(g: Digraph) -> np.ndarray:
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def follower_submatrix(g: Digraph) -> np.ndarray:
    """Laplacian with the leader's row and column deleted."""
    return laplacian(g)[1:, 1:]


def max_degree(g: Digraph) -> float:
    return float(np.max(np.diag(laplacian(g))))


def _reachable_from_leader(g: Digraph) -> set[int]:
    out = {v: [] for v in range(g.n_followers + 1)}
    for j, i in g.edges:
        out[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for nxt in out[v]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def check_assumption_graph(g: Digraph) -> Diagnosis:
    """Spanning tree rooted at the leader, and an undirected, connected follower subgraph."""
    n = g.n_followers
    followers = set(range(1, n + 1))

    unreachable = followers - _reachable_from_leader(g)
    follower_edges = {(j, i) for j, i in g.edges if j != 0}
    asymmetric = sorted(e for e in follower_edges if (e[1], e[0]) not in follower_edges)
    if asymmetric:
        return Diagnosis(False, f"follower subgraph not undirected: one-way edges {asymmetric}",
                         {"asymmetric_edges": asymmetric})

    # union-find over the (now symmetric) follower edges
    parent = {v: v for v in followers}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for j, i in follower_edges:
        parent[find(j)] = find(i)
    components = len({find(v) for v in followers})
    if components > 1:
        return Diagnosis(False, f"follower subgraph disconnected ({components} components)",
                         {"components": components, "unreachable": sorted(unreachable)})
    if unreachable:
        return Diagnosis(False, f"followers {sorted(unreachable)} not reachable from the leader",
                         {"unreachable": sorted(unreachable)})
    return Diagnosis(True, "spanning tree rooted at leader; follower subgraph undirected and connected")


SCHEDULE_KINDS = ("constant", "periodic", "list")


@dataclass(frozen=True)
class GraphSchedule:
    """A finite graph family plus a switching signal over it.

    ``kind`` is one of

    * ``"constant"``: always graph ``index`` (1-based),
    * ``"periodic"``: blocks of ``block`` steps cycling through ``order``
      (defaults to ``1..p``),
    * ``"list"``: ``order[k]`` for ``k < len(order)``, last value held afterwards.
    """

    family: tuple
    kind: str = "periodic"
    block: int = 1
    order: tuple = ()
    index: int = 1

    def __post_init__(self):
        family = tuple(self.family)
        if not family:
            raise GraphError("graph family is empty")
        n = family[0].n_followers
        if any(g.n_followers != n for g in family):
            raise GraphError("all graphs in the family must have the same number of followers")
        if self.kind not in SCHEDULE_KINDS:
            raise GraphError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        p = len(family)
        order = tuple(int(o) for o in self.order)
        if self.kind == "periodic" and not order:
            order = tuple(range(1, p + 1))
        if self.kind == "list" and not order:
            raise GraphError("list schedule needs a non-empty order")
        if any(not 1 <= o <= p for o in order):
            raise GraphError(f"schedule order {order} references graphs outside 1..{p}")
        if self.kind == "periodic" and int(self.block) < 1:
            raise GraphError("periodic block length must be >= 1")
        if self.kind == "constant" and not 1 <= int(self.index) <= p:
            raise GraphError(f"constant index {self.index} outside 1..{p}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "block", int(self.block))
        object.__setattr__(self, "index", int(self.index))

    @property
    def n_followers(self) -> int:
        return self.family[0].n_followers

    def sigma(self, k: int) -> int:
        """1-based index of the graph active at step ``k``."""
        if k < 0:
            raise ValueError("step must be >= 0")
        if self.kind == "constant":
            return self.index
        if self.kind == "periodic":
            return self.order[(k // self.block) % len(self.order)]
        return self.order[min(k, len(self.order) - 1)]

    def graph_at(self, k: int) -> Digraph:
        return self.family[self.sigma(k) - 1]


@dataclass(frozen=True)
class GraphConstants:
    delta: float
    lambda_max: float
    lambda_min: float
    mu_max: float

    def as_dict(self) -> dict:
        return {"delta": self.delta, "lambda_max": self.lambda_max,
                "lambda_min": self.lambda_min, "mu_max": self.mu_max}


def graph_constants(s: GraphSchedule) -> GraphConstants:
    """Max degree, extreme eigenvalues of the follower submatrices, and the observer-gain bound."""
    lo, hi, delta = np.inf, -np.inf, 0.0
    for idx, g in enumerate(s.family, start=1):
        diag = check_assumption_graph(g)
        if not diag.ok:
            raise GraphError(f"graph {idx} violates the connectivity assumption: {diag.reason}")
        eig = np.linalg.eigvalsh(follower_submatrix(g))
        lo, hi = min(lo, eig[0]), max(hi, eig[-1])
        delta = max(delta, max_degree(g))
    return GraphConstants(delta=delta, lambda_max=float(hi), lambda_min=float(lo),
                          mu_max=float(min(1.0 / delta, 2.0 / hi)))


def validate_mu(mu: float, c: GraphConstants) -> bool:
    return bool(0.0 < mu < c.mu_max)


def observer_gain_matrix_nonnegative(Hp, mu: float) -> bool:
    """Whether ``I - mu*Hp`` is entrywise nonnegative."""
    Hp = np.asarray(Hp, dtype=float)
    return is_nonnegative(np.eye(Hp.shape[0]) - mu * Hp)
