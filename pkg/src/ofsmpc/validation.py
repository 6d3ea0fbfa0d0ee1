"""Input validation helpers.

Every public entry point normalizes its array arguments through these
helpers so that downstream numerics can assume finite, correctly shaped
float64 data.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError

SYM_RTOL = 1e-12


def as_matrix(a, rows=None, cols=None, name="matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, optionally pinning its shape."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    if rows is not None and m.shape[0] != rows:
        raise ValidationError(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValidationError(f"{name} must have {cols} cols, got {m.shape[1]}")
    return m


def as_vector(a, size=None, name="vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array of optional fixed length."""
    v = np.asarray(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite entries")
    if size is not None and v.size != size:
        raise ValidationError(f"{name} must have length {size}, got {v.size}")
    return v


def as_square(a, n=None, name="matrix") -> np.ndarray:
    m = as_matrix(a, name=name)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got {m.shape}")
    if n is not None and m.shape[0] != n:
        raise ValidationError(f"{name} must be {n}x{n}, got {m.shape}")
    return m


def as_symmetric(a, name="matrix", rtol=SYM_RTOL) -> np.ndarray:
    """Validate symmetry to |M - M^T|_max <= rtol * (1 + |M|_max), then
    return the exactly symmetrized copy."""
    m = as_square(a, name=name)
    scale = 1.0 + (np.abs(m).max() if m.size else 0.0)
    skew = np.abs(m - m.T).max() if m.size else 0.0
    if skew > rtol * scale:
        raise ValidationError(
            f"{name} is not symmetric: |M - M^T|_max = {skew:.3e} "
            f"exceeds {rtol:.1e} * (1 + |M|_max)"
        )
    return 0.5 * (m + m.T)


def same_shape(a: np.ndarray, b: np.ndarray, name_a="A", name_b="B") -> None:
    if a.shape != b.shape:
        raise ValidationError(
            f"{name_a} shape {a.shape} does not match {name_b} shape {b.shape}"
        )
