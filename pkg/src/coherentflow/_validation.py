"""Input-checking helpers used by the public entry points."""

import numpy as np


def as_float_array(a, name, ndim=None):
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positions(points, name="points"):
    """Coerce to an (n, d) float array with n >= 1."""
    arr = as_float_array(points, name, ndim=2)
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one row")
    return arr


def check_square(m, name="matrix"):
    arr = as_float_array(m, name, ndim=2)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_same_shape(a, b, name_a, name_b):
    if a.shape != b.shape:
        raise ValueError(
            f"{name_a} and {name_b} must have matching shapes, "
            f"got {a.shape} and {b.shape}"
        )


def check_labels(labels, name="labels"):
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    arr = arr.astype(int)
    if arr.min() < 0:
        raise ValueError(f"{name} contains negative entries")
    return arr
