"""scikit-learn style wrappers over the functional core.

``AffineFormationLocalizer`` learns a stress from a nominal configuration
and predicts follower positions from leader positions.
``AffineTransformFitter`` learns an affine map between two configurations.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import TOL_MEMBERSHIP, check_configuration
from .geometry import apply_affine, enumerate_viable_assignments, fit_affine
from .graph import build_graph
from .reorganizer import affine_weight_stress, power_centric_topology
from .stress import (compute_equilibrium_stress, follower_positions_from_leaders,
                     is_affinely_localizable)


class AffineFormationLocalizer(BaseEstimator):
    """Stress-based follower localization.

    Parameters
    ----------
    leaders : sequence of int
        Leader ids.
    edges : sequence of (tail, head) or None
        Interaction digraph. ``None`` uses the power-centric topology.
    stress : {"auto", "equilibrium", "affine"}
        ``auto`` picks affine weights for the power-centric topology and a
        symmetric PSD equilibrium stress otherwise.
    """

    def __init__(self, leaders=(0, 1, 2), edges=None, stress="auto"):
        self.leaders = leaders
        self.edges = edges
        self.stress = stress

    def fit(self, X, y=None):
        X = check_configuration(X, name="nominal")
        n, d = X.shape
        leaders = [int(i) for i in self.leaders]
        if self.edges is None:
            g = power_centric_topology(leaders, [i for i in range(n) if i not in leaders], d)
        else:
            g = build_graph(n, d, self.edges, leaders)
        mode = self.stress
        if mode == "auto":
            mode = "affine" if self.edges is None else "equilibrium"
        if mode not in ("affine", "equilibrium"):
            raise ValueError(f"unknown stress mode {self.stress!r}")
        self.graph_ = g
        self.stress_ = (affine_weight_stress(g, X) if mode == "affine"
                        else compute_equilibrium_stress(g, X))
        self.report_ = is_affinely_localizable(self.stress_)
        self.nominal_ = X
        self.n_features_in_ = d
        return self

    def predict(self, leader_positions):
        """Follower positions (rows in ``graph_.followers`` order)."""
        check_is_fitted(self, "stress_")
        return follower_positions_from_leaders(self.stress_, leader_positions)

    def complete(self, leader_positions):
        """Full configuration with leaders placed and followers localized."""
        check_is_fitted(self, "stress_")
        p_l = check_configuration(leader_positions, n=self.graph_.n_l, d=self.n_features_in_)
        out = np.empty((self.graph_.n, self.n_features_in_))
        out[list(self.graph_.leaders)] = p_l
        out[list(self.graph_.followers)] = self.predict(p_l)
        return out

    def viable_assignments(self, tol=TOL_MEMBERSHIP):
        check_is_fitted(self, "stress_")
        return enumerate_viable_assignments(self.nominal_, self.graph_.n_l, tol,
                                            leader_slots=self.graph_.leaders)


class AffineTransformFitter(TransformerMixin, BaseEstimator):
    """Least-squares affine map fitted from ``X`` onto ``y``."""

    def fit(self, X, y):
        self.transform_, self.residual_ = fit_affine(X, y)
        self.n_features_in_ = self.transform_.d
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_affine(X, self.transform_)

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_affine(X, self.transform_.inverse())
