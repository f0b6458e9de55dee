"""Input validation helpers used by the functional core and the estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ParamError


def check_array(x, ndim: int, name: str = "array", dtype=np.float64, allow_empty=False):
    """Return ``x`` as a finite ndarray of the requested rank."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != ndim:
        raise ParamError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ParamError(f"{name} is empty")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ParamError(f"{name} contains non-finite values")
    return arr


def check_video(x, name: str = "video"):
    """Video volumes are laid out as (height, width, frames)."""
    return check_array(x, 3, name)


def check_image(x, name: str = "image"):
    return check_array(x, 2, name)


def check_same_shape(a, b, what: str = "inputs"):
    if np.shape(a) != np.shape(b):
        raise ParamError(f"{what} have mismatched shapes {np.shape(a)} and {np.shape(b)}")


def check_scalar(value, name, *, min_val=None, max_val=None, include_min=True, kind=numbers.Real):
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ParamError(f"{name} must be {kind.__name__}, got {type(value).__name__}")
    if min_val is not None:
        bad = value < min_val if include_min else value <= min_val
        if bad:
            op = ">=" if include_min else ">"
            raise ParamError(f"{name} must be {op} {min_val}, got {value}")
    if max_val is not None and value > max_val:
        raise ParamError(f"{name} must be <= {max_val}, got {value}")
    return value


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
