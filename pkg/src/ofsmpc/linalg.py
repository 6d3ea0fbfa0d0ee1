"""Dense symmetric linear algebra used throughout the package.

Covers the eigendecomposition, Loewner-order test, Riccati fixed point,
and positive-definite solves that the estimation and control layers need.
Problem sizes here are tiny (state dimensions of a few), so clarity wins
over scalability everywhere.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError, FactorizationError
from .validation import as_matrix, as_square, as_symmetric, same_shape

DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000


class SymEigResult(NamedTuple):
    """Eigenvalues sorted descending with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(m) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = as_symmetric(m, name="sym_eig input")
    w, v = np.linalg.eigh(m)
    return SymEigResult(w[::-1].copy(), v[:, ::-1].copy())


def psd_leq(a_lhs, b_rhs, tol: float = 1e-9) -> bool:
    """True iff a_lhs <= b_rhs in the Loewner order, to tolerance ``tol``
    on the smallest eigenvalue of the difference."""
    a = as_symmetric(a_lhs, name="psd_leq lhs")
    b = as_symmetric(b_rhs, name="psd_leq rhs")
    same_shape(a, b, "psd_leq lhs", "psd_leq rhs")
    return float(np.linalg.eigvalsh(b - a)[0]) >= -tol


def riccati_map(p, a, g, qc, rc) -> np.ndarray:
    """One application of the control-form Riccati map
    P -> A'PA - A'PG (G'PG + R)^-1 G'PA + Q."""
    gpg = g.T @ p @ g + rc
    apg = a.T @ p @ g
    out = a.T @ p @ a - apg @ np.linalg.solve(gpg, apg.T) + qc
    return 0.5 * (out + out.T)


def dare(a, g, qc, rc, tol: float = DARE_TOL, max_iter: int = DARE_MAX_ITER) -> np.ndarray:
    """Solve the discrete algebraic Riccati equation by fixed-point iteration
    of the control-form map from P0 = Qc.

    The filter-form equation is obtained by calling with (A^T, C^T).
    Raises ConvergenceError with the last residual if ``max_iter`` fixed-point
    steps do not reach ``tol`` in max-norm.
    """
    a = as_square(a, name="dare A")
    g = as_matrix(g, rows=a.shape[0], name="dare G")
    qc = as_symmetric(qc, name="dare Qc")
    rc = as_symmetric(rc, name="dare Rc")
    if tol <= 0:
        raise ValueError("dare tol must be positive")

    p = qc.copy()
    for _ in range(max_iter):
        p_next = riccati_map(p, a, g, qc, rc)
        step = np.abs(p_next - p).max()
        p = p_next
        if step <= tol:
            residual = np.abs(riccati_map(p, a, g, qc, rc) - p).max()
            if residual <= tol:
                return p
    residual = np.abs(riccati_map(p, a, g, qc, rc) - p).max()
    raise ConvergenceError(
        f"dare did not converge in {max_iter} iterations "
        f"(last residual {residual:.3e})",
        residual=residual,
    )


def chol_factor(m, name="matrix"):
    """Cholesky factor of a PD matrix, raising FactorizationError otherwise."""
    m = as_symmetric(m, name=name)
    try:
        return scipy.linalg.cho_factor(m, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(f"{name} is not positive definite: {exc}") from exc


def chol_solve(m, rhs) -> np.ndarray:
    """Solve M x = rhs for symmetric positive definite M."""
    factor = chol_factor(m, name="chol_solve matrix")
    b = np.asarray(rhs, dtype=float)
    squeeze = b.ndim == 1
    sol = scipy.linalg.cho_solve(factor, b.reshape(b.shape[0], -1))
    return sol[:, 0] if squeeze else sol


def psd_sqrt(m, clip_tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-clip_tol*scale, 0) are clipped to zero; anything more
    negative raises FactorizationError.
    """
    w, v = sym_eig(m)
    scale = 1.0 + abs(float(w[0])) if w.size else 1.0
    if w.size and float(w[-1]) < -clip_tol * scale:
        raise FactorizationError(
            f"matrix is not PSD (min eigenvalue {float(w[-1]):.3e})"
        )
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def spectral_radius(a) -> float:
    a = as_square(a, name="spectral_radius input")
    return float(np.abs(np.linalg.eigvals(a)).max())
