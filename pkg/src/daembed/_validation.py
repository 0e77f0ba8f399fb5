"""Small input-checking helpers shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionError


def as_matrix(X, name="X", min_samples=1):
    """Return ``X`` as a finite float64 2-D array."""
    try:
        return check_array(
            X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples,
            input_name=name,
        )
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc


def check_paired(X, Y, min_samples=2):
    X = as_matrix(X, "X", min_samples)
    Y = as_matrix(Y, "Y", min_samples)
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(
            f"views have different numbers of rows: {X.shape[0]} != {Y.shape[0]}"
        )
    return X, Y


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")
    return value


def fix_signs(columns, reference=None):
    """Flip each column so the largest-magnitude entry of ``reference`` is positive.

    ``reference`` defaults to ``columns``. Returns the per-column signs.
    """
    ref = columns if reference is None else reference
    if ref.shape[0] == 0:
        return np.ones(ref.shape[1])
    pivot = np.argmax(np.abs(ref), axis=0)
    signs = np.sign(ref[pivot, np.arange(ref.shape[1])])
    signs[signs == 0] = 1.0
    return signs
