"""Input checks shared by the estimator wrappers, the harness and the CLI."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array

from .spectral import check_nu


def check_series(y, min_length=2):
    """Return ``y`` as a finite float vector of length at least ``min_length``.

    A single-column 2-D array is accepted and flattened.
    """
    arr = check_array(y, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one series, got an array of shape {arr.shape}")
        arr = arr[:, 0]
    if arr.size < min_length:
        raise ValueError(f"series needs at least {min_length} observations, got {arr.size}")
    return np.ascontiguousarray(arr)


def check_positive(value, name):
    """``float(value)`` if it is finite and strictly positive."""
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number, got {value!r}") from None
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be finite and positive, got {value!r}")
    return x


def check_model_inputs(nu, delta):
    return check_nu(nu), check_positive(delta, "delta")
