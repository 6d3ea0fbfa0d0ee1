"""Dense strictly convex QP solver with certified infeasibility.

Solves  min 1/2 x'Hx + f'x  s.t.  G x <= h  with positive definite H by a
dual active-set method (Goldfarb/Idnani style): start at the unconstrained
minimum, repeatedly pull in the most violated constraint, dropping blocking
constraints along the dual steps. Strict convexity makes the minimizer
unique, and every full step enlarges the active set, so the method
terminates on these small problems.

Status contract:

* ``optimal``     - KKT point found; residuals reported on the result.
* ``infeasible``  - no feasible point exists; certified by an independent
  phase-1 LP whose optimum (the smallest uniform constraint relaxation) is
  reported as the certificate.
* iteration cap   - raises IterationLimitError. Never conflated with
  infeasibility, since downstream failure statistics count infeasible
  instances only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .exceptions import IterationLimitError, ValidationError
from .linalg import chol_factor
from .validation import as_matrix, as_symmetric, as_vector

QP_FEAS_TOL = 1e-9
QP_MAX_ITER = 500

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class DenseQp:
    """Condensed QP data. ``constant`` shifts reported objectives;
    ``constant_violation`` carries the worst violation among constraint rows
    that do not involve the decision variables (those rows are resolved
    before the solver runs)."""

    hessian: np.ndarray
    linear: np.ndarray
    g_mat: np.ndarray
    g_vec: np.ndarray
    constant: float = 0.0
    constant_violation: float = 0.0

    def __post_init__(self):
        h = as_symmetric(self.hessian, name="QP Hessian")
        f = as_vector(self.linear, size=h.shape[0], name="QP linear term")
        g = as_matrix(self.g_mat, cols=h.shape[0], name="QP constraint matrix") \
            if np.asarray(self.g_mat).size else np.zeros((0, h.shape[0]))
        b = as_vector(self.g_vec, size=g.shape[0], name="QP constraint rhs")
        object.__setattr__(self, "hessian", h)
        object.__setattr__(self, "linear", f)
        object.__setattr__(self, "g_mat", g)
        object.__setattr__(self, "g_vec", b)

    @property
    def n_var(self) -> int:
        return self.hessian.shape[0]


@dataclass(frozen=True, eq=False)
class QpResult:
    status: str
    x: np.ndarray | None
    duals: np.ndarray | None
    objective: float | None
    kkt_stationarity: float
    kkt_complementarity: float
    max_violation: float
    certificate: float | None = None   # phase-1 optimum when infeasible


def _phase1_certificate(g_mat, g_vec) -> float:
    """Smallest uniform relaxation gamma >= 0 with {G x <= h + gamma} feasible."""
    m, n = g_mat.shape
    if m == 0:
        return 0.0
    cols = np.hstack([g_mat, -np.ones((m, 1))])
    res = scipy.optimize.linprog(
        np.concatenate([np.zeros(n), [1.0]]),
        A_ub=cols, b_ub=g_vec,
        bounds=[(None, None)] * n + [(0.0, None)],
        method="highs",
    )
    if res.status != 0:
        raise IterationLimitError("phase-1 LP failed to resolve feasibility")
    return float(res.x[-1])


def solve_qp(qp: DenseQp, max_iter: int = QP_MAX_ITER,
             feas_tol: float = QP_FEAS_TOL, h_factor=None) -> QpResult:
    """Solve a DenseQp. ``h_factor`` may carry a cached Cholesky factor of
    the Hessian (from :func:`ofsmpc.linalg.chol_factor`)."""
    if qp.constant_violation > feas_tol:
        return QpResult(INFEASIBLE, None, None, None, 0.0, 0.0,
                        qp.constant_violation, certificate=qp.constant_violation)

    h_mat, f = qp.hessian, qp.linear
    g_mat, g_vec = qp.g_mat, qp.g_vec
    if h_factor is None:
        h_factor = chol_factor(h_mat, name="QP Hessian")

    # Rows with (numerically) zero normals cannot be influenced by x.
    row_norms = np.linalg.norm(g_mat, axis=1) if g_mat.size else np.zeros(0)
    zero_rows = np.where(row_norms < 1e-13)[0]
    if zero_rows.size and (-g_vec[zero_rows]).max() > feas_tol:
        worst = float((-g_vec[zero_rows]).max())
        return QpResult(INFEASIBLE, None, None, None, 0.0, 0.0, worst,
                        certificate=worst)
    live = np.where(row_norms >= 1e-13)[0]
    g_live, b_live = g_mat[live], g_vec[live]

    def h_solve(rhs):
        return scipy.linalg.cho_solve(h_factor, rhs)

    x = -h_solve(f)
    active: list[int] = []
    duals: list[float] = []

    for _ in range(max_iter):
        slack = g_live @ x - b_live if g_live.size else np.zeros(0)
        if active:
            slack = slack.copy()
            slack[active] = -np.inf   # never re-select an active row
        if slack.size == 0 or slack.max() <= feas_tol:
            return _finish(qp, live, x, active, duals, h_factor)
        inc = int(np.argmax(slack))
        a = g_live[inc]

        u_inc = 0.0
        while True:
            if active:
                n_mat = g_live[active].T                      # n x q
                hin = h_solve(n_mat)
                m_small = n_mat.T @ hin
                hia = h_solve(a)
                try:
                    r = np.linalg.solve(m_small, n_mat.T @ hia)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(m_small, n_mat.T @ hia, rcond=None)[0]
                z = hia - hin @ r
            else:
                r = np.zeros(0)
                z = h_solve(a)

            za = float(z @ a)
            s_inc = float(a @ x - b_live[inc])
            if s_inc <= feas_tol:
                break  # violation resolved by previous partial steps

            t_full = s_inc / za if za > 1e-13 else np.inf
            blocking = -1
            t_dual = np.inf
            for j, (uj, rj) in enumerate(zip(duals, r)):
                if rj > 1e-13 and uj / rj < t_dual:
                    t_dual = uj / rj
                    blocking = j
            t = min(t_full, t_dual)
            if not np.isfinite(t):
                cert = _phase1_certificate(g_mat, g_vec)
                if cert <= feas_tol:
                    raise IterationLimitError(
                        "QP solver reported infeasible but the phase-1 LP "
                        "found a feasible point"
                    )
                return QpResult(INFEASIBLE, None, None, None, 0.0, 0.0,
                                float(slack.max()), certificate=cert)

            x = x - t * z
            duals = [uj - t * rj for uj, rj in zip(duals, r)]
            u_inc += t
            if t == t_full:
                active.append(inc)
                duals.append(u_inc)
                break
            active.pop(blocking)
            duals.pop(blocking)

    raise IterationLimitError(f"QP solver exceeded {max_iter} iterations")


def _finish(qp, live, x, active, duals, h_factor) -> QpResult:
    """Polish on the final active set and assemble residuals."""
    h_mat, f = qp.hessian, qp.linear
    g_live, b_live = qp.g_mat[live], qp.g_vec[live]
    n = qp.n_var
    if active:
        n_mat = g_live[active].T
        q = n_mat.shape[1]
        kkt = np.block([[h_mat, n_mat], [n_mat.T, np.zeros((q, q))]])
        rhs = np.concatenate([-f, b_live[active]])
        try:
            sol = np.linalg.solve(kkt, rhs)
            x_pol, lam_pol = sol[:n], sol[n:]
            ok = lam_pol.min(initial=0.0) >= -1e-9
            viol_pol = (g_live @ x_pol - b_live).max(initial=0.0)
            if ok and viol_pol <= 1e-8:
                x, duals = x_pol, list(lam_pol)
        except np.linalg.LinAlgError:
            pass

    lam_full = np.zeros(qp.g_mat.shape[0])
    for idx, lam in zip(active, duals):
        lam_full[live[idx]] = max(lam, 0.0)
    grad = h_mat @ x + f + qp.g_mat.T @ lam_full if qp.g_mat.size else h_mat @ x + f
    slack_full = qp.g_mat @ x - qp.g_vec if qp.g_mat.size else np.zeros(0)
    stationarity = float(np.abs(grad).max(initial=0.0))
    complementarity = float(np.abs(lam_full * slack_full).max(initial=0.0))
    violation = float(np.maximum(slack_full, 0.0).max(initial=0.0))
    objective = float(0.5 * x @ h_mat @ x + f @ x + qp.constant)
    return QpResult(OPTIMAL, x, lam_full, objective,
                    stationarity, complementarity, violation)
