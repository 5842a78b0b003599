"""Directed interaction graphs with a leader/follower role partition.

Edges are ordered pairs ``(tail, head)``: information flows from the tail to
the head, so the tail is an in-neighbor of the head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx

from ._validation import check_dimension
from .exceptions import DuplicateEdge, IndexOutOfRange, SelfLoop, TooFewAgents


@dataclass(frozen=True)
class FormationGraph:
    """Immutable digraph over agents ``0..n-1`` with a role partition.

    Build instances with :func:`build_graph`, which validates the input.
    """

    n: int
    d: int
    edges: tuple[tuple[int, int], ...]
    leaders: tuple[int, ...]
    _in: tuple[frozenset, ...] = field(repr=False, compare=False)

    @property
    def followers(self) -> tuple[int, ...]:
        lead = set(self.leaders)
        return tuple(i for i in range(self.n) if i not in lead)

    @property
    def n_l(self) -> int:
        return len(self.leaders)

    @property
    def n_f(self) -> int:
        return self.n - len(self.leaders)

    @property
    def order(self) -> tuple[int, ...]:
        """Agent ids with leaders first, then followers."""
        return self.leaders + self.followers

    def in_neighbors(self, i: int) -> frozenset:
        return in_neighbors(self, i)

    def with_leaders(self, leaders) -> "FormationGraph":
        return build_graph(self.n, self.d, self.edges, leaders)

    def to_networkx(self) -> nx.DiGraph:
        G = nx.DiGraph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(self.edges)
        return G


def build_graph(n, d, edges, leaders) -> FormationGraph:
    """Validate and build a :class:`FormationGraph`.

    Followers are the complement of ``leaders``. Raises
    :class:`TooFewAgents` when ``n < d + 1``.
    """
    d = check_dimension(d)
    n = int(n)
    if n < d + 1:
        raise TooFewAgents(f"need n >= d + 1 = {d + 1} agents, got {n}")

    seen = set()
    incoming = [set() for _ in range(n)]
    for e in edges:
        tail, head = (int(v) for v in e)
        for v in (tail, head):
            if not 0 <= v < n:
                raise IndexOutOfRange(f"edge {(tail, head)} references agent {v}, n={n}")
        if tail == head:
            raise SelfLoop(f"self-loop on agent {tail}")
        if (tail, head) in seen:
            raise DuplicateEdge(f"edge {(tail, head)} listed twice")
        seen.add((tail, head))
        incoming[head].add(tail)

    leaders = tuple(int(v) for v in leaders)
    for v in leaders:
        if not 0 <= v < n:
            raise IndexOutOfRange(f"leader {v} out of range for n={n}")
    if len(set(leaders)) != len(leaders):
        raise ValueError(f"leader list {leaders} contains duplicates")

    return FormationGraph(
        n=n, d=d, edges=tuple(sorted(seen)), leaders=leaders,
        _in=tuple(frozenset(s) for s in incoming),
    )


def in_neighbors(g: FormationGraph, i: int) -> frozenset:
    """Return ``{j | (j, i) in E}``."""
    if not 0 <= i < g.n:
        raise IndexOutOfRange(f"agent {i} out of range for n={g.n}")
    return g._in[i]


def complete_graph(n, d, leaders) -> FormationGraph:
    edges = [(j, i) for i in range(n) for j in range(n) if i != j]
    return build_graph(n, d, edges, leaders)


def _disjoint_path_count(G: nx.DiGraph, roots, target) -> int:
    """Max number of internally node-disjoint paths from distinct roots to target.

    Every node except the target is split into an in/out pair joined by a
    unit-capacity arc; a super-source feeds each root with capacity one.
    """
    H = nx.DiGraph()
    for u in G.nodes:
        if u != target:
            H.add_edge(("in", u), ("out", u), capacity=1)
    for a, b in G.edges:
        if a == target:
            continue
        H.add_edge(("out", a), ("in", b), capacity=1)
    for r in roots:
        H.add_edge("source", ("in", r), capacity=1)
    if ("in", target) not in H:
        return 0
    return int(nx.maximum_flow_value(H, "source", ("in", target)))


def _roots_ok(G, roots, need) -> bool:
    roots = set(roots)
    return all(
        _disjoint_path_count(G, roots, v) >= need
        for v in G.nodes if v not in roots
    )


def is_d_plus_1_rooted(g: FormationGraph):
    """Check the (d+1)-rooted condition.

    Returns ``(True, roots)`` when some set of ``d + 1`` roots reaches every
    other node through ``d + 1`` internally disjoint directed paths, else
    ``(False, None)``. Candidate root sets drawn from the leaders are tried
    before arbitrary subsets.
    """
    need = g.d + 1
    G = g.to_networkx()
    if g.n == need:
        return True, tuple(range(g.n))

    tried = set()
    candidates = list(combinations(sorted(g.leaders), need))
    candidates += list(combinations(range(g.n), need))
    for roots in candidates:
        if roots in tried:
            continue
        tried.add(roots)
        if _roots_ok(G, roots, need):
            return True, roots
    return False, None
