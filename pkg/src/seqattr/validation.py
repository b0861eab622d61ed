"""Input validation helpers used by estimators and attributors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError


def as_float_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a contiguous float64 ndarray, rejecting non-numeric input."""
    arr = np.asarray(x)
    if arr.dtype == object:
        raise TypeError(f"{name} must be numeric, got object dtype")
    return np.ascontiguousarray(arr, dtype=np.float64)


def check_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or inf")
    return arr


def check_ndim(arr: np.ndarray, ndim: int, name: str = "array") -> np.ndarray:
    if arr.ndim != ndim:
        raise ShapeMismatchError(name, f"expected {ndim}-d, got shape {arr.shape}")
    return arr


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_probability(value, name: str) -> float:
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return v


def check_in(value, allowed: Sequence, name: str):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {sorted(map(str, allowed))}, got {value!r}")
    return value


def check_records(records, name: str = "records") -> list:
    """Validate a sequence of PatientRecord-like objects (duck-typed)."""
    if not isinstance(records, (list, tuple)):
        raise TypeError(f"{name} must be a list of records")
    if len(records) == 0:
        raise ValueError(f"{name} is empty")
    for i, r in enumerate(records):
        for attr in ("visits", "labs", "deltas"):
            if not hasattr(r, attr):
                raise TypeError(f"{name}[{i}] lacks field {attr!r}")
    return list(records)


def rng_from_seed(seed) -> np.random.Generator:
    """Build a Generator from an int seed or SeedSequence; passthrough for Generators."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
