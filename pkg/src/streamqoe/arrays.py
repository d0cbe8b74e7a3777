"""Input coercion shared by the estimators."""

import numpy as np

from .errors import FeatureError


def as_design_matrix(X):
    """Return X as a 2-D float64 array; a 1-D input is one feature column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise FeatureError(f"design matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise FeatureError("design matrix contains NaN or infinite values")
    return X


def as_target(y, n_rows=None):
    y = np.asarray(y, dtype=np.float64).ravel()
    if n_rows is not None and y.shape[0] != n_rows:
        raise FeatureError(f"target has {y.shape[0]} rows, design matrix has {n_rows}")
    if not np.all(np.isfinite(y)):
        raise FeatureError("target contains NaN or infinite values")
    return y


def canonical_row_order(X, y):
    """Row order sorted by target, then by each feature column.

    Fitting on canonically ordered rows makes results independent of the order
    the caller supplied the rows in.
    """
    keys = np.vstack([y, X.T])
    return np.lexsort(keys[::-1])
