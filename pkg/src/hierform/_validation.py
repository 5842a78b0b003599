"""Input validation helpers and numerical tolerances shared by all modules."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch

# relative, against the largest singular value of [p | 1]
TOL_RANK = 1e-8
# |det A| threshold for an affine map to count as invertible
TOL_DET = 1e-8
# default affine-image membership tolerance, meters (RMS residual)
TOL_MEMBERSHIP = 1e-6
# equilibrium residual, meters
TOL_EQ = 1e-9
# smallest singular value of the follower block, after normalization
TOL_SING = 1e-10

SUPPORTED_DIMENSIONS = (2, 3)


def check_configuration(X, *, d=None, n=None, name="configuration"):
    """Return ``X`` as a finite float64 array of shape ``(n, d)``.

    A 1-D input is read as a single point.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    X = check_array(X, dtype=np.float64, ensure_all_finite=True,
                    input_name=name, ensure_min_features=1)
    if d is not None and X.shape[1] != d:
        raise DimensionMismatch(
            f"{name} has points in R^{X.shape[1]}, expected R^{d}")
    if n is not None and X.shape[0] != n:
        raise DimensionMismatch(f"{name} has {X.shape[0]} points, expected {n}")
    return X


def check_point(x, *, d=None, name="point"):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    if d is not None and x.shape[0] != d:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {d}")
    return x


def check_square(A, *, d=None, name="matrix"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if d is not None and A.shape[0] != d:
        raise DimensionMismatch(f"{name} must be {d}x{d}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


def check_dimension(d):
    if d not in SUPPORTED_DIMENSIONS:
        raise DimensionMismatch(f"d must be one of {SUPPORTED_DIMENSIONS}, got {d}")
    return int(d)
