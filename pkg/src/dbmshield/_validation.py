"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np


def check_binary_array(X, *, ensure_2d=True, name="X"):
    """Return ``X`` as a float64 array whose entries are all exactly 0 or 1.

    Raises
    ------
    ValueError
        If ``X`` has an entry other than 0/1, is empty, or has the wrong rank.
    """
    arr = np.asarray(X, dtype=np.float64)
    if ensure_2d:
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValueError(f"{name} must have at least one column")
    if arr.size and not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError(f"{name} must contain only 0 and 1 entries")
    return arr


def check_probabilities(p, name="probs"):
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def check_positive_int(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_float(value, name, *, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_n_features(X, n_expected, name="data"):
    if X.shape[1] != n_expected:
        raise ValueError(
            f"{name} has {X.shape[1]} variables but the model expects {n_expected}"
        )
