import numpy as np
from sklearn.utils import check_array

from .exceptions import InputError


def check_points(theta, dimension):
    """Coerce ``theta`` to a float array of shape (n, dimension).

    Returns the 2-D array and a flag telling whether the input was a single
    vector, so callers can hand back a scalar in that case.
    """
    arr = np.asarray(theta, dtype=float)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise InputError(f"expected a vector or a 2-D array, got ndim={arr.ndim}")
    if arr.shape[1] != dimension:
        raise InputError(
            f"dimension mismatch: expected {dimension} coordinates, got {arr.shape[1]}"
        )
    return arr, single


def check_draws(X, min_samples=1):
    """Validate a finite (n_draws, dimension) matrix."""
    try:
        return check_array(
            X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples,
            ensure_all_finite=True,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def check_positive(name, value):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)) or np.any(value <= 0):
        raise InputError(f"{name} must be finite and > 0, got {value.tolist()}")
    return value


def broadcast_param(name, value, dimension):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dimension, float(arr))
    if arr.shape != (dimension,):
        raise InputError(f"{name} must be a scalar or have length {dimension}")
    return arr


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence(int(seed))


def derive_seed(seed, *key):
    """Child SeedSequence addressed by ``key``; unlike ``spawn`` it does not
    mutate the parent, so the same key always yields the same stream."""
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(key))
