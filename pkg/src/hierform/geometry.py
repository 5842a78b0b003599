"""Affine spans, affine maps, least-squares affine fits and role reassignment.

Configurations are ``(n, d)`` float arrays, one row per agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import (TOL_DET, TOL_MEMBERSHIP, TOL_RANK, check_configuration,
                          check_point, check_square)
from .exceptions import DegenerateSource, DimensionMismatch

# exhaustive assignment search is exact but combinatorial
MAX_ENUMERATION_AGENTS = 10


@dataclass(frozen=True)
class AffineTransform:
    """The map ``p -> A @ p + b``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = check_square(self.A, name="A")
        b = check_point(self.b, d=A.shape[0], name="b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d))

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def det(self):
        return float(np.linalg.det(self.A))

    def is_invertible(self, tol=TOL_DET):
        return abs(self.det) > tol

    def compose(self, inner: "AffineTransform") -> "AffineTransform":
        """``self ∘ inner``: apply ``inner`` first."""
        return AffineTransform(self.A @ inner.A, self.A @ inner.b + self.b)

    def inverse(self) -> "AffineTransform":
        Ainv = np.linalg.inv(self.A)
        return AffineTransform(Ainv, -Ainv @ self.b)

    def __call__(self, X):
        return apply_affine(X, self)


@dataclass(frozen=True)
class RoleAssignment:
    """A new leader set together with the relabeling it induces.

    ``permutation[i]`` is the slot whose nominal position agent ``i`` takes
    over, so the role-permuted nominal is ``nominal[permutation]``. The agent
    sent to the ``k``-th leader slot is ``leaders[k]``.
    """

    leaders: tuple[int, ...]
    permutation: tuple[int, ...]
    transform: AffineTransform
    residual: float

    @property
    def leader_set(self):
        return frozenset(self.leaders)

    def permuted(self, nominal):
        return np.asarray(nominal)[list(self.permutation)]

    def sort_key(self):
        return (tuple(sorted(self.leaders)), self.leaders, self.permutation)


def _homogeneous(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def affinely_spans(X, tol_rank=TOL_RANK) -> bool:
    """True iff ``rank([X | 1]) == d + 1``."""
    X = check_configuration(X)
    n, d = X.shape
    if n < d + 1:
        return False
    s = np.linalg.svd(_homogeneous(X), compute_uv=False)
    if s[0] == 0:
        return False
    return int(np.sum(s >= tol_rank * s[0])) == d + 1


def apply_affine(X, t: AffineTransform):
    X = check_configuration(X)
    if X.shape[1] != t.d:
        raise DimensionMismatch(
            f"configuration in R^{X.shape[1]} but transform acts on R^{t.d}")
    return X @ t.A.T + t.b


def fit_affine(src, dst, tol_rank=TOL_RANK):
    """Least-squares affine map from ``src`` onto ``dst``.

    Returns ``(transform, residual)`` with ``residual`` the RMS per-point
    error in meters. Raises :class:`DegenerateSource` if ``src`` does not
    affinely span, since the minimizer is then not unique.
    """
    src = check_configuration(src, name="src")
    dst = check_configuration(dst, d=src.shape[1], n=src.shape[0], name="dst")
    if not affinely_spans(src, tol_rank):
        raise DegenerateSource("source configuration does not affinely span R^d")
    H = _homogeneous(src)
    X, *_ = np.linalg.lstsq(H, dst, rcond=None)
    d = src.shape[1]
    t = AffineTransform(X[:d].T, X[d])
    err = H @ X - dst
    residual = float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))
    return t, residual


def in_affine_image(query, ref, tol=TOL_MEMBERSHIP, tol_det=TOL_DET) -> bool:
    """True iff ``query`` is an invertible affine image of ``ref`` within ``tol``."""
    t, residual = fit_affine(ref, query)
    return residual <= tol and t.is_invertible(tol_det)


def _anchor_slots(nominal, leader_slots):
    """First d + 1 leader slots (in order) whose nominal points affinely span."""
    d = nominal.shape[1]
    for combo in combinations(leader_slots, d + 1):
        if affinely_spans(nominal[list(combo)]):
            return list(combo)
    raise DegenerateSource("leader slots do not affinely span R^d")


def _match(nominal, t, agents, slots, perm):
    """Optimal matching of mapped ``agents`` onto ``slots``, written into ``perm``."""
    if not agents:
        return
    mapped = apply_affine(nominal[agents], t)
    cost = ((mapped[:, None, :] - nominal[slots][None, :, :]) ** 2).sum(-1)
    rows, cols = linear_sum_assignment(cost)
    for r, c in zip(rows, cols):
        perm[agents[r]] = slots[c]


def enumerate_viable_assignments(nominal, n_l, tol=TOL_MEMBERSHIP, *,
                                 leader_slots=None, exclude=()):
    """All role reassignments that keep the formation in its affine image.

    An assignment is viable when (i) the new leaders' nominal positions
    affinely span R^d and (ii) the role-permuted nominal is an invertible
    affine image of ``nominal``. ``leader_slots`` are the ids currently
    holding the leader roles (default ``range(n_l)``); agents in ``exclude``
    never become leaders.

    For each candidate leader set, every ordered choice of ``d + 1`` of its
    members sent onto ``d + 1`` spanning anchor slots fixes the affine map;
    the remaining leaders and the followers are then matched optimally onto
    their slots. Assignments sharing a leader set and fitted map are
    reported once. Cost is ``C(n, n_l) * n_l! / (n_l - d - 1)!`` small fits.
    """
    nominal = check_configuration(nominal, name="nominal")
    n, d = nominal.shape
    if n > MAX_ENUMERATION_AGENTS:
        raise ValueError(f"exhaustive enumeration is capped at n <= "
                         f"{MAX_ENUMERATION_AGENTS}, got n={n}")
    n_l = int(n_l)
    if leader_slots is None:
        leader_slots = tuple(range(n_l))
    leader_slots = tuple(int(i) for i in leader_slots)
    if len(leader_slots) != n_l:
        raise ValueError("leader_slots must have length n_l")
    if not affinely_spans(nominal) or n_l < d + 1 or n_l > n:
        return []

    follower_slots = [i for i in range(n) if i not in set(leader_slots)]
    anchors = _anchor_slots(nominal, leader_slots)
    rest_slots = [s for s in leader_slots if s not in anchors]
    excluded = {int(i) for i in exclude}
    found = []
    for cand in combinations(range(n), n_l):
        if excluded.intersection(cand):
            continue
        if not affinely_spans(nominal[list(cand)]):
            continue
        cand_followers = [i for i in range(n) if i not in cand]
        for ordered in permutations(cand, d + 1):
            if not affinely_spans(nominal[list(ordered)]):
                continue
            # r_{perm[i]} = A r_i + b on the anchors fixes (A, b)
            t, _ = fit_affine(nominal[list(ordered)], nominal[anchors])
            if not t.is_invertible():
                continue
            perm = [0] * n
            for agent, slot in zip(ordered, anchors):
                perm[agent] = slot
            others = [i for i in cand if i not in ordered]
            _match(nominal, t, others, rest_slots, perm)
            _match(nominal, t, cand_followers, follower_slots, perm)
            permuted = nominal[perm]
            t_full, residual = fit_affine(nominal, permuted)
            if residual > tol or not t_full.is_invertible():
                continue
            leaders = [0] * n_l
            slot_pos = {s: k for k, s in enumerate(leader_slots)}
            for agent in cand:
                leaders[slot_pos[perm[agent]]] = agent
            found.append(RoleAssignment(tuple(leaders), tuple(perm), t_full, residual))

    found.sort(key=RoleAssignment.sort_key)
    unique = []
    for a in found:
        if any(a.leader_set == u.leader_set
               and np.allclose(a.transform.A, u.transform.A, atol=1e-9)
               and np.allclose(a.transform.b, u.transform.b, atol=1e-9)
               for u in unique):
            continue
        unique.append(a)
    return unique
