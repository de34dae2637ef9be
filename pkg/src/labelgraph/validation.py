"""Input validation helpers for array-shaped arguments.

These normalize user-facing inputs (lists, dense arrays, scipy sparse
matrices) into the canonical representations the numerical code expects,
raising :class:`~labelgraph.errors.ValidationError` with a readable message
instead of letting shape bugs surface deep inside a matmul.
"""

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


def check_feature_matrix(X, n_features=None):
    """Coerce ``X`` to a float64 CSR matrix of shape (n_samples, n_features).

    Accepts dense arrays, anything numpy can coerce, or any scipy sparse
    format. Rejects non-finite values.
    """
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)
        X.sum_duplicates()
        X.sort_indices()
    else:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {arr.shape}")
        X = sp.csr_matrix(arr)
    if not np.all(np.isfinite(X.data)):
        raise ValidationError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(
            f"feature matrix has {X.shape[1]} columns, expected {n_features}"
        )
    return X


def check_label_matrix(Y, n_labels=None, n_samples=None):
    """Coerce ``Y`` to an int8 array of shape (n_samples, n_labels) with
    entries in {0, 1}."""
    if sp.issparse(Y):
        Y = Y.toarray()
    Y = np.asarray(Y)
    if Y.ndim != 2:
        raise ValidationError(f"label matrix must be 2-D, got shape {Y.shape}")
    vals = np.unique(Y)
    if not np.isin(vals, (0, 1)).all():
        bad = vals[~np.isin(vals, (0, 1))][0]
        raise ValidationError(f"label matrix entries must be 0 or 1, found {bad!r}")
    if n_labels is not None and Y.shape[1] != n_labels:
        raise ValidationError(f"label matrix has {Y.shape[1]} columns, expected {n_labels}")
    if n_samples is not None and Y.shape[0] != n_samples:
        raise ValidationError(f"label matrix has {Y.shape[0]} rows, expected {n_samples}")
    return Y.astype(np.int8)


def check_probability_matrix(P, n_labels=None):
    """Validate a matrix of predicted probabilities in [0, 1]."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2:
        raise ValidationError(f"probability matrix must be 2-D, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError("probability matrix contains non-finite values")
    if P.min() < 0.0 or P.max() > 1.0:
        raise ValidationError("probabilities must lie in [0, 1]")
    if n_labels is not None and P.shape[1] != n_labels:
        raise ValidationError(f"probability matrix has {P.shape[1]} columns, expected {n_labels}")
    return P


def check_threshold(threshold):
    """Decision thresholds must lie strictly inside (0, 1)."""
    t = float(threshold)
    if not 0.0 < t < 1.0:
        raise ValidationError(f"threshold must be in (0, 1), got {threshold!r}")
    return t


def check_same_shape(A, B, what="matrices"):
    if A.shape != B.shape:
        raise ValidationError(f"{what} have mismatched shapes {A.shape} vs {B.shape}")
