"""Equilibrium stresses, stress matrices and affine localizability."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from ._validation import TOL_EQ, TOL_SING, check_configuration
from .exceptions import (Cancelled, DegenerateConfiguration, MissingEdgeWeight,
                         NotLocalizable, NotRooted, NoValidStress)
from .geometry import affinely_spans
from .graph import FormationGraph, build_graph, is_d_plus_1_rooted

# relative eigenvalue threshold for the rank / PSD checks on Omega
TOL_EIG = 1e-8
# dense eigen-solves per candidate keep this to desk-scale formations
MAX_STRESS_AGENTS = 64


@dataclass(frozen=True)
class StressBlocks:
    ll: np.ndarray
    lf: np.ndarray
    fl: np.ndarray
    ff: np.ndarray

    def assemble(self):
        return np.block([[self.ll, self.lf], [self.fl, self.ff]])


@dataclass(frozen=True)
class StressAssignment:
    """Edge weights on ``graph`` and the stress matrix they induce.

    ``weights[(j, i)]`` is the weight agent ``i`` puts on in-neighbor ``j``.
    """

    graph: FormationGraph
    weights: dict
    omega: np.ndarray = field(repr=False)

    @property
    def blocks(self) -> StressBlocks:
        return partition_stress(self, self.graph)


@dataclass(frozen=True)
class LocalizabilityReport:
    localizable: bool
    det_omega_ff: float
    min_singular_value_ff: float


def assemble_stress_matrix(g: FormationGraph, weights) -> np.ndarray:
    """Row-wise stress matrix: ``-w`` on edges, in-weight sums on the diagonal."""
    omega = np.zeros((g.n, g.n))
    for tail, head in g.edges:
        try:
            w = float(weights[(tail, head)])
        except KeyError:
            raise MissingEdgeWeight(f"no weight for edge {(tail, head)}") from None
        omega[head, tail] -= w
        omega[head, head] += w
    return omega


def make_stress(g: FormationGraph, weights) -> StressAssignment:
    weights = {e: float(weights[e]) for e in g.edges} if g.edges else {}
    return StressAssignment(g, weights, assemble_stress_matrix(g, weights))


def partition_stress(s: StressAssignment, g: FormationGraph = None) -> StressBlocks:
    g = s.graph if g is None else g
    L, F = list(g.leaders), list(g.followers)
    om = s.omega
    return StressBlocks(om[np.ix_(L, L)], om[np.ix_(L, F)],
                        om[np.ix_(F, L)], om[np.ix_(F, F)])


def equilibrium_residual(g: FormationGraph, r, weights) -> float:
    """``max |(Omega ⊗ I_d) r|`` in meters."""
    r = check_configuration(r, n=g.n)
    omega = weights if isinstance(weights, np.ndarray) else assemble_stress_matrix(g, weights)
    if omega.size == 0:
        return 0.0
    return float(np.max(np.abs(omega @ r))) if g.n else 0.0


def is_affinely_localizable(s: StressAssignment, tol_sing=TOL_SING) -> LocalizabilityReport:
    ff = partition_stress(s).ff
    if ff.size == 0:
        return LocalizabilityReport(True, 1.0, float("inf"))
    sv = np.linalg.svd(ff, compute_uv=False)
    smin = float(sv[-1])
    return LocalizabilityReport(smin > tol_sing, float(np.linalg.det(ff)), smin)


def follower_positions_from_leaders(s: StressAssignment, p_l):
    """Solve ``p_f = -Omega_ff^{-1} Omega_fl p_l``; rows follow ``graph.followers``."""
    g = s.graph
    p_l = check_configuration(p_l, n=g.n_l, name="leader positions")
    report = is_affinely_localizable(s)
    if not report.localizable:
        raise NotLocalizable(
            f"Omega_ff is singular (min singular value {report.min_singular_value_ff:.3e})")
    b = partition_stress(s)
    if g.n_f == 0:
        return np.zeros((0, p_l.shape[1]))
    return -np.linalg.solve(b.ff, b.fl @ p_l)


def _symmetric_pairs(g):
    return sorted({(min(a, b), max(a, b)) for a, b in g.edges})


def _pair_omega(n, a, b):
    E = np.zeros((n, n))
    E[a, a] = E[b, b] = 1.0
    E[a, b] = E[b, a] = -1.0
    return E


def equilibrium_stress_basis(g: FormationGraph, r):
    """Orthonormal basis of symmetric equilibrium stresses.

    Returns ``(pairs, N)``: ``pairs`` are undirected edges ``(a, b)`` with
    ``a < b`` and the columns of ``N`` span the weight vectors ``w`` with
    ``sum_j w_ij (r_j - r_i) = 0`` at every node.
    """
    r = check_configuration(r, d=g.d, n=g.n)
    pairs = _symmetric_pairs(g)
    n, d = r.shape
    E = np.zeros((n * d, len(pairs)))
    for k, (a, b) in enumerate(pairs):
        E[a * d:(a + 1) * d, k] = r[b] - r[a]
        E[b * d:(b + 1) * d, k] = r[a] - r[b]
    if not pairs:
        return pairs, np.zeros((0, 0))
    return pairs, null_space(E)


def _check_cancel(cancel):
    if cancel is not None and cancel.is_set():
        raise Cancelled("stress selection cancelled")


def _lambda_min(Ms, c):
    return float(np.linalg.eigvalsh(np.tensordot(c, Ms, axes=1))[0])


def _select_coefficients(Ms, cancel=None, seed=0):
    """Unit coefficients ``c`` maximizing ``lambda_min(sum_k c_k M_k)``.

    Coarse pass over signed axes plus seeded random directions, then a
    smooth soft-min refinement inside the unit ball with increasing
    sharpness. The objective is concave so the refinement cannot hurt.
    """
    k = Ms.shape[0]
    if k == 1:
        return np.array([1.0]) if _lambda_min(Ms, [1.0]) >= _lambda_min(Ms, [-1.0]) \
            else np.array([-1.0])

    rng = np.random.default_rng(seed)
    cands = np.vstack([np.eye(k), -np.eye(k), rng.standard_normal((min(256, 32 * k), k))])
    cands /= np.linalg.norm(cands, axis=1, keepdims=True)
    best, best_val = None, -np.inf
    for c in cands:
        _check_cancel(cancel)
        v = _lambda_min(Ms, c)
        if v > best_val:
            best, best_val = c, v

    c = best
    for beta in (10.0, 100.0, 1000.0):
        _check_cancel(cancel)

        def neg_softmin(x, beta=beta):
            lam, V = np.linalg.eigh(np.tensordot(x, Ms, axes=1))
            z = np.exp(-beta * (lam - lam[0]))
            p = z / z.sum()
            val = lam[0] - np.log(z.sum()) / beta
            # d lambda_i / d x_k = v_i^T M_k v_i
            grads = np.einsum("ai,kab,bi->ki", V, Ms, V)
            return -val, -(grads @ p)

        res = minimize(neg_softmin, c, jac=True, method="SLSQP",
                       constraints=[{"type": "ineq",
                                     "fun": lambda x: 1.0 - x @ x,
                                     "jac": lambda x: -2.0 * x}],
                       options={"maxiter": 200, "ftol": 1e-12})
        x = res.x / max(np.linalg.norm(res.x), 1e-300)
        if _lambda_min(Ms, x) > _lambda_min(Ms, c):
            c = x
    return c


def compute_equilibrium_stress(g: FormationGraph, r, *, cancel=None,
                               tol_eq=TOL_EQ) -> StressAssignment:
    """Symmetric PSD equilibrium stress of rank ``n - d - 1``.

    The graph is symmetrized: one weight per unordered pair, used in both
    directions, and the returned assignment lives on the symmetrized graph.
    Among all equilibrium stresses the one maximizing the smallest nonzero
    eigenvalue of Omega is chosen, then scaled so ``max |w| = 1``.

    ``cancel`` is an optional ``threading.Event``; setting it aborts the
    selection with :class:`Cancelled`.
    """
    r = check_configuration(r, d=g.d, n=g.n)
    if g.n > MAX_STRESS_AGENTS:
        raise ValueError(f"stress selection is limited to n <= {MAX_STRESS_AGENTS}")
    if not affinely_spans(r):
        raise DegenerateConfiguration("nominal configuration does not affinely span R^d")
    rooted, _ = is_d_plus_1_rooted(g)
    if not rooted:
        raise NotRooted(f"graph is not {g.d + 1}-rooted")

    n, d = r.shape
    pairs = _symmetric_pairs(g)
    sym = build_graph(n, d, [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs],
                      g.leaders)
    target_rank = n - d - 1
    if target_rank == 0:
        return make_stress(sym, {e: 0.0 for e in sym.edges})

    pairs, N = equilibrium_stress_basis(g, r)
    if N.size == 0 or N.shape[1] == 0:
        raise NoValidStress("the equilibrium system has only the zero stress")

    # restrict to the complement of span[r | 1], which every stress annihilates
    Q = null_space(np.hstack([r, np.ones((n, 1))]).T)
    basis_omegas = np.array([
        sum(N[e, k] * _pair_omega(n, a, b) for e, (a, b) in enumerate(pairs))
        for k in range(N.shape[1])
    ])
    Ms = np.einsum("ia,kij,jb->kab", Q, basis_omegas, Q)
    Ms = 0.5 * (Ms + Ms.transpose(0, 2, 1))
    c = _select_coefficients(Ms, cancel)

    w = N @ c
    w = w / np.max(np.abs(w))
    weights = {}
    for (a, b), wk in zip(pairs, w):
        weights[(a, b)] = weights[(b, a)] = float(wk)
    s = make_stress(sym, weights)

    eig = np.linalg.eigvalsh(0.5 * (s.omega + s.omega.T))
    scale = max(np.max(np.abs(eig)), 1e-300)
    if eig[0] < -TOL_EIG * scale:
        raise NoValidStress(f"no PSD equilibrium stress found (lambda_min={eig[0]:.3e})")
    rank = int(np.sum(eig > TOL_EIG * scale))
    if rank != target_rank:
        raise NoValidStress(f"best stress has rank {rank}, need {target_rank}")
    if equilibrium_residual(sym, r, s.omega) > tol_eq:
        raise NoValidStress("selected stress violates the equilibrium condition")
    return s
