"""Input checks shared by the estimator front end."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

__all__ = ["check_points", "check_targets"]

_SLACK = 1e-12


def check_points(X, interval=(0.0, 1.0), name="X") -> np.ndarray:
    """Return ``X`` as a 1-D float array of points inside ``interval``.

    Accepts shape ``(n,)`` or ``(n, 1)``.
    """
    arr = check_array(X, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"{name} must have a single feature (x), got shape {arr.shape}")
        arr = arr[:, 0]
    a, b = interval
    if np.any(arr < a - _SLACK) or np.any(arr > b + _SLACK):
        raise ValueError(f"{name} has points outside [{a}, {b}]")
    return np.clip(arr, a, b)


def check_targets(y, n, name="y") -> np.ndarray:
    arr = check_array(y, ensure_2d=False, dtype=np.float64, input_name=name)
    arr = arr.reshape(-1)
    if arr.size != n:
        raise ValueError(f"{name} has {arr.size} values for {n} points")
    return arr
