"""Small input-checking helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numbers
from typing import Sequence

import numpy as np

from .errors import ConfigError


def as_vector(x, dim: int | None = 3, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite float vector, checking its length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ConfigError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def as_unit_vector(x, dim: int = 3, name: str = "direction", tol: float = 1e-9) -> np.ndarray:
    """Check that ``x`` has unit length (within ``tol``) and return it renormalized."""
    arr = as_vector(x, dim, name)
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > tol:
        raise ConfigError(f"{name} must be a unit vector, |{name}|={norm:.12g}")
    return arr / norm


def normalize(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    norm = np.linalg.norm(arr)
    if norm == 0.0 or not np.isfinite(norm):
        raise ConfigError(f"{name} cannot be normalized (norm={norm})")
    return arr / norm


def check_positive(value, name: str, strict: bool = True) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_interval(value, name: str, low: float, high: float,
                   closed: tuple[bool, bool] = (False, False)) -> float:
    """Check ``low < value < high`` with optionally closed ends."""
    value = float(value)
    lo_ok = value >= low if closed[0] else value > low
    hi_ok = value <= high if closed[1] else value < high
    if not (lo_ok and hi_ok):
        lb = "[" if closed[0] else "("
        rb = "]" if closed[1] else ")"
        raise ConfigError(f"{name}={value} not in {lb}{low}, {high}{rb}")
    return value


def check_story(story: Sequence[int] | None) -> tuple[int, ...]:
    """Validate a story of reflections: entries in {1, 2}, consecutive entries differ."""
    if story is None:
        return ()
    out = tuple(int(j) for j in story)
    for j in out:
        if j not in (1, 2):
            raise ConfigError(f"story entries must be 1 or 2, got {j}")
    for a, b in zip(out, out[1:]):
        if a == b:
            raise ConfigError(f"story {out} repeats obstacle {a} consecutively")
    return out


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``/int/Generator into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.integer)):
        return np.random.default_rng(seed)
    raise ConfigError(f"cannot build a random generator from {seed!r}")
