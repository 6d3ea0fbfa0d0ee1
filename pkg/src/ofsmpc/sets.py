"""Polytopic set algebra for confidence sets and constraint tightening.

Confidence sets are zonotopes (Minkowski sums of segments), which makes
the two operations the tube construction needs exact and cheap:

* Minkowski sum: concatenate generator lists.
* Pontryagin difference from an H-polytope: subtract the zonotope's
  support, row by row.

Constraint sets are H-polytopes ``{x : H x <= h}``. Support values and
emptiness are decided with an LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.special

from .exceptions import (ConvergenceError, EmptySetError, UnboundedError,
                         ValidationError)
from .linalg import spectral_radius, sym_eig
from .validation import as_matrix, as_square, as_symmetric, as_vector

SUPPORT_TOL = 1e-8


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Set {center + sum_j alpha_j g_j : |alpha_j| <= 1}.

    ``generators`` holds one generator per row. ``degenerate_axes`` records
    construction directions that collapsed to zero length (kept for
    reporting, they do not affect the geometry).
    """

    center: np.ndarray
    generators: np.ndarray
    degenerate_axes: tuple = ()

    def __post_init__(self):
        c = as_vector(self.center, name="zonotope center")
        g = as_matrix(self.generators, cols=c.size, name="zonotope generators") \
            if np.asarray(self.generators).size else \
            np.zeros((0, c.size))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    @classmethod
    def zero(cls, dim: int) -> "Zonotope":
        return cls(np.zeros(dim), np.zeros((0, dim)))

    @property
    def dim(self) -> int:
        return self.center.size

    def support(self, direction) -> float:
        d = as_vector(direction, size=self.dim, name="direction")
        return float(d @ self.center + np.abs(self.generators @ d).sum())

    def row_supports(self, normals: np.ndarray) -> np.ndarray:
        """Support values along each row of ``normals`` in one shot."""
        return normals @ self.center + np.abs(normals @ self.generators.T).sum(axis=1)

    def contains(self, point, tol: float = 1e-9) -> bool:
        """Membership test: does some |alpha| <= 1 reproduce the point?"""
        x = as_vector(point, size=self.dim, name="point") - self.center
        g = self.generators
        m = g.shape[0]
        if m == 0:
            return bool(np.abs(x).max(initial=0.0) <= tol)
        if m == self.dim:
            try:
                alpha = np.linalg.solve(g.T, x)
            except np.linalg.LinAlgError:
                alpha = None
            if alpha is not None:
                return bool(np.abs(alpha).max() <= 1.0 + tol)
        res = scipy.optimize.linprog(
            np.zeros(m), A_eq=g.T, b_eq=x, bounds=[(-1.0, 1.0)] * m,
            method="highs",
        )
        return res.status == 0

    def is_degenerate(self) -> bool:
        return len(self.degenerate_axes) > 0


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Set {x : normals @ x <= offsets}, one inequality per row."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        h_mat = as_matrix(self.normals, name="polytope normals")
        h_vec = as_vector(self.offsets, size=h_mat.shape[0], name="polytope offsets")
        row_norms = np.linalg.norm(h_mat, axis=1)
        if h_mat.shape[0] and row_norms.min() < 1e-14:
            raise ValidationError("polytope has a zero normal row")
        object.__setattr__(self, "normals", h_mat)
        object.__setattr__(self, "offsets", h_vec)

    @classmethod
    def from_box(cls, lower, upper) -> "HPolytope":
        lo = as_vector(lower, name="lower")
        hi = as_vector(upper, size=lo.size, name="upper")
        eye = np.eye(lo.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_rows(self) -> int:
        return self.normals.shape[0]

    def contains(self, point, tol: float = 1e-9) -> bool:
        x = as_vector(point, size=self.dim, name="point")
        return bool((self.normals @ x <= self.offsets + tol).all())

    def violation(self, point) -> float:
        x = as_vector(point, size=self.dim, name="point")
        return float(np.maximum(self.normals @ x - self.offsets, 0.0).max(initial=0.0))

    def witness(self):
        """A feasible point, or None if the polytope is empty."""
        res = scipy.optimize.linprog(
            np.zeros(self.dim), A_ub=self.normals, b_ub=self.offsets,
            bounds=[(None, None)] * self.dim, method="highs",
        )
        return res.x if res.status == 0 else None

    def is_empty(self) -> bool:
        return self.witness() is None

    def intersect(self, other: "HPolytope") -> "HPolytope":
        if other.dim != self.dim:
            raise ValidationError("cannot intersect polytopes of different dimension")
        return HPolytope(np.vstack([self.normals, other.normals]),
                         np.concatenate([self.offsets, other.offsets]))

    def reduce(self, tol: float = SUPPORT_TOL) -> "HPolytope":
        """Drop rows whose removal does not change the set."""
        h_mat, h_vec = self.normals, self.offsets
        keep = list(range(self.n_rows))
        for i in range(self.n_rows):
            trial = [j for j in keep if j != i]
            if not trial:
                break
            status, value, _ = _linprog_max(h_mat[i], h_mat[trial], h_vec[trial])
            if status == 0 and value <= h_vec[i] + tol:
                keep = trial
        return HPolytope(h_mat[keep], h_vec[keep])


@dataclass(frozen=True)
class ProbabilityBudget:
    """Row-wise split p_m of a total violation probability p."""

    total: float
    per_row: tuple

    def __post_init__(self):
        if not (0.0 < self.total < 1.0):
            raise ValidationError("total probability must lie in (0, 1)")
        rows = tuple(float(p) for p in self.per_row)
        if any(not (0.0 < p < 1.0) for p in rows):
            raise ValidationError("every per-row probability must lie in (0, 1)")
        if abs(sum(rows) - self.total) > 1e-12:
            raise ValidationError("per-row probabilities must sum to the total")
        object.__setattr__(self, "per_row", rows)

    @classmethod
    def uniform(cls, total: float, n_rows: int) -> "ProbabilityBudget":
        return cls(total, tuple([total / n_rows] * n_rows))


# ---------------------------------------------------------------------------
# scalar helpers


def inv_norm_cdf(q: float) -> float:
    """Inverse standard normal CDF."""
    q = float(q)
    if not (0.0 < q < 1.0):
        raise ValidationError(f"quantile must lie in (0, 1), got {q}")
    return float(scipy.special.ndtri(q))


def _linprog_max(d, h_mat, h_vec):
    """Maximize d @ x over {H x <= h}. Returns (status, value, x)."""
    res = scipy.optimize.linprog(
        -np.asarray(d, dtype=float), A_ub=h_mat, b_ub=h_vec,
        bounds=[(None, None)] * h_mat.shape[1], method="highs",
    )
    if res.status == 0:
        return 0, float(np.asarray(d) @ res.x), res.x
    return res.status, None, None


# ---------------------------------------------------------------------------
# operations


def ubcs(sigma_bound, budget: ProbabilityBudget) -> Zonotope:
    """Uniformly bounded confidence set for a zero-mean Gaussian family whose
    covariances are dominated by ``sigma_bound``.

    The facet normals are the eigenvector pairs [V; -V] of the bound; the
    half-width along eigenvector j is inv_norm_cdf(1 - p_j) * sqrt(lambda_j).
    With a non-uniform budget the two opposite rows of a pair may disagree;
    the larger half-width is kept so the set still covers both rows.
    """
    sigma = as_symmetric(sigma_bound, name="sigma_bound")
    n = sigma.shape[0]
    if len(budget.per_row) != 2 * n:
        raise ValidationError(
            f"budget must have {2 * n} entries (rows of [V; -V]), "
            f"got {len(budget.per_row)}"
        )
    lam, vecs = sym_eig(sigma)
    if lam[-1] < -1e-10 * (1.0 + abs(float(lam[0]))):
        raise ValidationError("sigma_bound must be positive semidefinite")
    lam = np.clip(lam, 0.0, None)
    p_rows = np.asarray(budget.per_row)
    quantiles = np.array([
        max(inv_norm_cdf(1.0 - p_rows[j]), inv_norm_cdf(1.0 - p_rows[n + j]))
        for j in range(n)
    ])
    half_widths = quantiles * np.sqrt(lam)
    degenerate = tuple(int(j) for j in range(n) if half_widths[j] == 0.0)
    generators = (vecs * half_widths).T
    return Zonotope(np.zeros(n), generators, degenerate_axes=degenerate)


def minkowski_sum(z1: Zonotope, z2: Zonotope) -> Zonotope:
    if z1.dim != z2.dim:
        raise ValidationError("Minkowski sum needs matching dimensions")
    return Zonotope(z1.center + z2.center,
                    np.vstack([z1.generators, z2.generators]))


def linear_map(m, z: Zonotope) -> Zonotope:
    mat = as_matrix(m, cols=z.dim, name="linear map")
    return Zonotope(mat @ z.center, z.generators @ mat.T)


def pontryagin_diff(p: HPolytope, z: Zonotope) -> HPolytope:
    """P minus-Pontryagin Z, exact for a zonotope subtrahend: each offset
    drops by the zonotope's support along that row. The result may be empty;
    callers that need nonemptiness must check."""
    if p.dim != z.dim:
        raise ValidationError("Pontryagin difference needs matching dimensions")
    if np.abs(z.center).max(initial=0.0) > 1e-12:
        raise ValidationError("subtrahend zonotope must be centered at the origin")
    return HPolytope(p.normals, p.offsets - z.row_supports(p.normals))


def lp_support(p: HPolytope, direction):
    """Support value of ``p`` along ``direction`` plus a maximizer."""
    d = as_vector(direction, size=p.dim, name="direction")
    status, value, x = _linprog_max(d, p.normals, p.offsets)
    if status == 2:
        raise EmptySetError("support of an empty polytope")
    if status == 3:
        raise UnboundedError("polytope is unbounded along the requested direction")
    if status != 0:
        raise UnboundedError(f"LP solver failed with status {status}")
    return value, x


def poly_includes(outer: HPolytope, inner: HPolytope,
                  tol: float = SUPPORT_TOL) -> bool:
    """True iff inner is a subset of outer (supportwise, to ``tol``)."""
    for normal, offset in zip(outer.normals, outer.offsets):
        value, _ = lp_support(inner, normal)
        if value > offset + tol:
            return False
    return True


def max_rpi(acl, disturbance: Zonotope, state_set: HPolytope,
            max_iter: int = 200, tol: float = SUPPORT_TOL) -> HPolytope:
    """Maximal robust positive invariant set of x+ = Acl x + w, w in the
    disturbance zonotope, inside ``state_set``.

    Iterates Omega_{t+1} = S  intersect  {x : Acl x in Omega_t - W} until the
    iterate stops shrinking, then verifies the invariance certificate
    row by row. Raises EmptySetError when the disturbance is too large for
    the state set, ConvergenceError (with ``last_iterate`` attached) when
    ``max_iter`` is exhausted.
    """
    acl = as_square(acl, n=state_set.dim, name="Acl")
    if disturbance.dim != state_set.dim:
        raise ValidationError("disturbance dimension must match the state set")
    rho = spectral_radius(acl)
    if rho >= 1.0:
        raise ValidationError(f"Acl must be Schur, got spectral radius {rho:.6f}")
    if state_set.n_rows == 0 or (state_set.offsets <= 0.0).any():
        raise ValidationError("state set must contain the origin in its interior")

    omega = state_set
    for _ in range(max_iter):
        shrunk = pontryagin_diff(omega, disturbance)
        if (shrunk.offsets < 0.0).all() or shrunk.is_empty():
            raise EmptySetError(
                "RPI iteration emptied out: disturbance too large for the state set",
                stage="max_rpi",
            )
        pre = HPolytope(shrunk.normals @ acl, shrunk.offsets)
        candidate = state_set.intersect(pre)
        if candidate.is_empty():
            raise EmptySetError(
                "RPI iteration emptied out: disturbance too large for the state set",
                stage="max_rpi",
            )
        if poly_includes(candidate, omega, tol):
            result = candidate.reduce(tol)
            _verify_rpi(acl, disturbance, result, tol)
            return result
        omega = candidate

    err = ConvergenceError(f"max_rpi did not reach a fixed point in {max_iter} iterations")
    err.last_iterate = omega
    raise err


def _verify_rpi(acl, disturbance, omega: HPolytope, tol: float):
    w_sup = disturbance.row_supports(omega.normals)
    for i in range(omega.n_rows):
        value, _ = lp_support(omega, omega.normals[i] @ acl)
        if value + w_sup[i] > omega.offsets[i] + 10 * tol:
            raise EmptySetError(
                f"RPI certificate failed on row {i}", stage="max_rpi verification"
            )


def _tighten_sequence(base: HPolytope, subtrahend_gens, n_steps: int, stage: str):
    """Shared shrinking-tube accumulation. ``subtrahend_gens[q]`` are the
    generators to subtract starting at element q+1."""
    out = [base]
    offsets = base.offsets.copy()
    for i in range(1, n_steps):
        gens = subtrahend_gens[i - 1]
        if gens.size:
            offsets = offsets - np.abs(base.normals @ gens.T).sum(axis=1)
        element = HPolytope(base.normals, offsets.copy())
        if (offsets < 0.0).all() or element.is_empty():
            raise EmptySetError(f"{stage} emptied out at element {i}",
                                stage=f"{stage} i={i}")
        out.append(element)
    return out


def tighten_state(xhat_set: HPolytope, noise_set: Zonotope, acl,
                  n_steps: int) -> list:
    """Shrinking-tube state constraints: element i is
    xhat_set minus (E + Acl E + ... + Acl^{i-1} E)."""
    if n_steps < 1:
        raise ValidationError("horizon must be at least 1")
    acl = as_square(acl, n=xhat_set.dim, name="Acl")
    powers = [np.linalg.matrix_power(acl, q) for q in range(n_steps - 1)]
    gens = [noise_set.generators @ p.T for p in powers]
    return _tighten_sequence(xhat_set, gens, n_steps, "state tightening")


def tighten_input(input_set: HPolytope, noise_set: Zonotope, k_gain, acl,
                  n_steps: int) -> list:
    """Shrinking-tube input constraints: element i subtracts the images
    K Acl^q E for q < i."""
    if n_steps < 1:
        raise ValidationError("horizon must be at least 1")
    k_gain = as_matrix(k_gain, cols=noise_set.dim, name="K")
    acl = as_square(acl, n=noise_set.dim, name="Acl")
    if input_set.dim != k_gain.shape[0]:
        raise ValidationError("input set dimension must match rows of K")
    powers = [np.linalg.matrix_power(acl, q) for q in range(n_steps - 1)]
    gens = [noise_set.generators @ (k_gain @ p).T for p in powers]
    return _tighten_sequence(input_set, gens, n_steps, "input tightening")


def terminal_set(xf_hat: HPolytope, noise_set: Zonotope, acl,
                 n_steps: int) -> HPolytope:
    """Terminal constraint: the RPI set minus the N-term disturbance tube."""
    acl = as_square(acl, n=xf_hat.dim, name="Acl")
    tube = Zonotope.zero(xf_hat.dim)
    for q in range(n_steps):
        tube = minkowski_sum(
            tube, linear_map(np.linalg.matrix_power(acl, q), noise_set))
    result = pontryagin_diff(xf_hat, tube)
    if (result.offsets < 0.0).all() or result.is_empty():
        raise EmptySetError("terminal set emptied out", stage="terminal set")
    return result


# ---------------------------------------------------------------------------
# plain-text serialization for CLI dumps


def format_hpolytope(p: HPolytope) -> str:
    lines = []
    for offset, normal in zip(p.offsets, p.normals):
        coeffs = " ".join(repr(float(v)) for v in normal)
        lines.append(f"{offset!r} : {coeffs}")
    return "\n".join(lines)


def format_zonotope(z: Zonotope) -> str:
    lines = ["center : " + " ".join(repr(float(v)) for v in z.center)]
    for gen in z.generators:
        lines.append("gen : " + " ".join(repr(float(v)) for v in gen))
    if z.degenerate_axes:
        lines.append("degenerate_axes : " +
                     " ".join(str(i) for i in z.degenerate_axes))
    return "\n".join(lines)


def format_matrix(m) -> str:
    mat = np.atleast_2d(np.asarray(m, dtype=float))
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in mat)
