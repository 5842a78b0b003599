"""Hierarchical reorganization: leader reselection and power-centric topology.

After a reorganization every follower listens to every leader and to no
other follower. Follower weights are affine coordinates of the follower
with respect to the leaders, so ``Omega_ff`` is diagonal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import null_space

from ._validation import TOL_MEMBERSHIP, check_configuration, check_point
from .exceptions import (DegenerateLeaders, LeadersDoNotSpan, NoViableAssignment,
                         NotViableAssignment, TooFewLeaders)
from .geometry import RoleAssignment, affinely_spans, enumerate_viable_assignments
from .graph import FormationGraph, build_graph
from .stress import (LocalizabilityReport, StressAssignment, is_affinely_localizable,
                     make_stress)


def power_centric_topology(leaders, followers, d) -> FormationGraph:
    """Followers hear every leader and no follower; leaders form a complete digraph."""
    leaders = [int(i) for i in leaders]
    followers = [int(i) for i in followers]
    if len(leaders) < d + 1:
        raise TooFewLeaders(f"need at least d + 1 = {d + 1} leaders, got {len(leaders)}")
    edges = [(a, b) for a in leaders for b in leaders if a != b]
    edges += [(l, f) for f in followers for l in leaders]
    return build_graph(len(leaders) + len(followers), d, edges, leaders)


def incidence_matrix(g: FormationGraph):
    """Signed incidence matrix with leader rows first.

    Returns ``(D, edges)``. Columns list edges into leaders first, then
    edges into each follower grouped by follower; the tail carries ``+1``
    and the head ``-1``. Under this ordering the follower rows restricted to
    follower-headed columns form the block-diagonal ``-1`` pattern.
    """
    lead = set(g.leaders)
    edges = [e for e in g.edges if e[1] in lead]
    for f in g.followers:
        edges += [(t, f) for t in sorted(g.in_neighbors(f))]
    row = {agent: k for k, agent in enumerate(g.order)}
    D = np.zeros((g.n, len(edges)))
    for k, (tail, head) in enumerate(edges):
        D[row[tail], k] += 1.0
        D[row[head], k] -= 1.0
    return D, edges


def _neighbor_system(r_f, leader_points):
    r_f = check_point(r_f, name="follower position")
    L = check_configuration(leader_points, d=r_f.shape[0], name="leader points")
    d = r_f.shape[0]
    if L.shape[0] < d + 1 or not affinely_spans(L):
        raise DegenerateLeaders("neighbor positions do not affinely span R^d")
    return r_f, L


def per_follower_stress(r_f, leader_points):
    """Affine coordinates of ``r_f`` in terms of ``leader_points``.

    Solves ``sum_j w_j (r_j - r_f) = 0`` with ``sum_j w_j = 1``, taking the
    minimum-norm solution when there are more than ``d + 1`` leaders.
    """
    r_f, L = _neighbor_system(r_f, leader_points)
    d = r_f.shape[0]
    M = np.vstack([(L - r_f).T, np.ones(L.shape[0])])
    rhs = np.zeros(d + 1)
    rhs[-1] = 1.0
    w, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return w


def raw_follower_stress(r_f, leader_points):
    """Unit-norm equilibrium weights before the sum-to-one normalization.

    The equilibrium constraints alone leave the affine dependencies among
    the leaders free; those carry zero sum, so they are projected out and
    the remaining one-dimensional direction is returned. Its weight sum is
    what must stay away from zero for the normalization to be legal.
    """
    r_f, L = _neighbor_system(r_f, leader_points)
    B = null_space((L - r_f).T)
    K = null_space(np.vstack([L.T, np.ones(L.shape[0])]))
    if K.size:
        B = B - K @ (K.T @ B)
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    u = U[:, 0]
    return u if u[np.argmax(np.abs(u))] > 0 else -u


def affine_weight_stress(g: FormationGraph, r) -> StressAssignment:
    """Row-wise stress giving each follower affine weights over its in-neighbors.

    Leader rows carry zero weight. Works for any digraph whose follower
    in-neighborhoods affinely span R^d, not only power-centric ones.
    """
    r = check_configuration(r, d=g.d, n=g.n)
    weights = {e: 0.0 for e in g.edges}
    for f in g.followers:
        nbrs = sorted(g.in_neighbors(f))
        w = per_follower_stress(r[f], r[nbrs])
        for j, wj in zip(nbrs, w):
            weights[(j, f)] = float(wj)
    return make_stress(g, weights)


def block_omega_ff(per_follower_weights):
    """Diagonal of ``Omega_ff`` and its determinant for a power-centric graph."""
    diag = np.array([float(np.sum(w)) for w in per_follower_weights])
    return diag, float(abs(np.prod(diag)))


# ---------------------------------------------------------------------------
# leader selection

@dataclass(frozen=True)
class CostContext:
    """What a leader cost may know about the environment.

    ``goal_direction`` is the unit travel direction; ``next_waypoint`` the
    upcoming route point (``None`` when holding). ``body`` maps nominal
    offsets from the nominal centroid to world offsets after a realigning
    reorganization, and ``offset`` is the world-frame shape offset.
    """

    goal_direction: np.ndarray
    next_waypoint: np.ndarray | None = None
    body: np.ndarray | None = None
    offset: np.ndarray | None = None


LeaderCost = Callable[[RoleAssignment, object, CostContext], float]


def _alive(state):
    alive = getattr(state, "alive", None)
    n = len(state.positions)
    return np.ones(n, bool) if alive is None else np.asarray(alive, bool)


def heading_align_cost(assignment, state, env) -> float:
    """Negative mean cosine between leader offsets and the travel direction."""
    g = np.asarray(env.goal_direction, float)
    gn = np.linalg.norm(g)
    if gn == 0:
        return 0.0
    p = np.asarray(state.positions)
    centroid = p[_alive(state)].mean(axis=0)
    cos = []
    for i in assignment.leaders:
        v = p[i] - centroid
        vn = np.linalg.norm(v)
        cos.append(0.0 if vn == 0 else float(v @ g) / (vn * gn))
    return -float(np.mean(cos))


def path_balance_cost(assignment, state, env) -> float:
    """Predicted max-min spread of straight-line distances to the next targets."""
    if env.next_waypoint is None:
        return 0.0
    p = np.asarray(state.positions)
    nominal = np.asarray(state.nominal)
    d = p.shape[1]
    body = np.eye(d) if env.body is None else np.asarray(env.body)
    offset = np.zeros(d) if env.offset is None else np.asarray(env.offset)
    rel = nominal[list(assignment.permutation)] - nominal.mean(axis=0)
    targets = np.asarray(env.next_waypoint) + rel @ body.T + offset
    dist = np.linalg.norm(targets - p, axis=1)[_alive(state)]
    return float(dist.max() - dist.min())


COSTS: dict[str, LeaderCost] = {
    "heading_align": heading_align_cost,
    "path_balance": path_balance_cost,
}


def select_leaders(viable, cost: LeaderCost, state, env) -> RoleAssignment:
    """Minimum-cost viable assignment; ties go to the smallest leader ids."""
    viable = list(viable)
    if not viable:
        raise NoViableAssignment("no viable leader assignment")
    if len(viable) == 1:
        return viable[0]
    scored = [(float(cost(a, state, env)), a.sort_key(), a) for a in viable]
    scored.sort(key=lambda t: (t[0], t[1]))
    return scored[0][2]


# ---------------------------------------------------------------------------
# reorganization plans

@dataclass(frozen=True)
class ReorganizationPlan:
    new_leaders: tuple[int, ...]
    new_graph: FormationGraph
    new_stress: StressAssignment
    switch_latency: float
    assignment: RoleAssignment
    new_nominal: np.ndarray = field(repr=False)
    report: LocalizabilityReport = None
    per_follower_weights: tuple = ()
    cost: float | None = None


def _excluded(state, exclude):
    out = {int(i) for i in exclude}
    out |= {i for i, ok in enumerate(_alive(state)) if not ok}
    return out


def viable_assignments(state, exclude=(), tol=TOL_MEMBERSHIP):
    """Viable reassignments of ``state``'s nominal, keeping its leader count."""
    g = state.graph
    return enumerate_viable_assignments(state.nominal, g.n_l, tol,
                                        leader_slots=g.leaders,
                                        exclude=_excluded(state, exclude))


def plan_for_assignment(state, assignment: RoleAssignment, *, started=None,
                        cost=None) -> ReorganizationPlan:
    """Build the power-centric plan realizing ``assignment``."""
    started = time.perf_counter() if started is None else started
    g = state.graph
    positions = np.asarray(state.positions)
    leaders = tuple(assignment.leaders)
    if not affinely_spans(positions[list(leaders)]):
        raise LeadersDoNotSpan(f"current positions of leaders {leaders} do not span R^{g.d}")

    new_nominal = assignment.permuted(state.nominal)
    followers = [i for i in range(g.n) if i not in set(leaders)]
    new_graph = power_centric_topology(leaders, followers, g.d)
    per_w = tuple(per_follower_stress(new_nominal[f], new_nominal[list(leaders)])
                  for f in followers)
    weights = {e: 0.0 for e in new_graph.edges}
    for f, w in zip(followers, per_w):
        for l, wl in zip(leaders, w):
            weights[(l, f)] = float(wl)
    stress = make_stress(new_graph, weights)
    report = is_affinely_localizable(stress)
    latency = time.perf_counter() - started
    return ReorganizationPlan(leaders, new_graph, stress, latency, assignment,
                              new_nominal, report, per_w, cost)


def _identity_distance(a: RoleAssignment):
    d = a.transform.d
    return float(np.linalg.norm(a.transform.A - np.eye(d)) + np.linalg.norm(a.transform.b))


def reorganize(state, new_leaders, *, exclude=(), tol=TOL_MEMBERSHIP) -> ReorganizationPlan:
    """Switch to ``new_leaders`` with a power-centric topology.

    ``state`` needs ``positions``, ``nominal`` and ``graph`` (the current
    role partition); an ``alive`` mask, when present, excludes dead agents.
    Raises :class:`LeadersDoNotSpan` if the new leaders' current positions
    are degenerate and :class:`NotViableAssignment` if no viable relabeling
    puts them in the leader slots. When several relabelings share the
    leader set, the one listing ``new_leaders`` in the given slot order wins,
    then the one closest to the identity map.
    """
    started = time.perf_counter()
    new_leaders = tuple(int(i) for i in new_leaders)
    positions = np.asarray(state.positions)
    if len(new_leaders) < state.graph.d + 1 or not affinely_spans(positions[list(new_leaders)]):
        raise LeadersDoNotSpan(
            f"current positions of leaders {new_leaders} do not affinely span R^{state.graph.d}")
    if len(new_leaders) != state.graph.n_l:
        raise NotViableAssignment(
            f"expected {state.graph.n_l} leaders, got {len(new_leaders)}")
    target = frozenset(new_leaders)
    # only the requested set can lead, so everyone else is excluded from the search
    others = [i for i in range(state.graph.n) if i not in target]
    matches = [a for a in viable_assignments(state, tuple(exclude) + tuple(others), tol)
               if a.leader_set == target]
    if not matches:
        raise NotViableAssignment(f"leader set {sorted(target)} is not a viable assignment")
    exact = [a for a in matches if a.leaders == new_leaders]
    chosen = exact[0] if exact else min(matches, key=lambda a: (_identity_distance(a), a.sort_key()))
    return plan_for_assignment(state, chosen, started=started)


def auto_reorganize(state, cost: LeaderCost | str, env: CostContext, *, exclude=(),
                    tol=TOL_MEMBERSHIP) -> ReorganizationPlan:
    """Pick the cheapest viable assignment under ``cost`` and plan it."""
    started = time.perf_counter()
    cost_fn = COSTS[cost] if isinstance(cost, str) else cost
    viable = viable_assignments(state, exclude, tol)
    positions = np.asarray(state.positions)
    viable = [a for a in viable if affinely_spans(positions[list(a.leaders)])]
    chosen = select_leaders(viable, cost_fn, state, env)
    return plan_for_assignment(state, chosen, started=started,
                               cost=float(cost_fn(chosen, state, env)))
