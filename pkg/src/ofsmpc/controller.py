"""Receding-horizon controller: tightened QP, control law, feasibility probe.

The MPC decision variable is the stacked auxiliary input sequence c_{0..N-1}
with the nominal states eliminated by forward substitution
x_i = A^i xhat + sum_j A^{i-1-j} B c_j, so the QP is small, dense, and has
inequality constraints only. Constraint rows at prediction step 0 restate
xhat's membership in the first state set; they do not involve the decision
variables and are resolved as a membership precheck.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimation import SystemModel
from .exceptions import EmptySetError, ValidationError
from .linalg import (DARE_MAX_ITER, DARE_TOL, chol_factor, dare,
                     spectral_radius)
from .qp import INFEASIBLE, OPTIMAL, QP_MAX_ITER, DenseQp, QpResult, solve_qp
from .sets import HPolytope, Zonotope, max_rpi
from .validation import as_symmetric, as_vector

CONSTRAINT_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Stage and terminal quadratic weights."""

    q_stage: np.ndarray
    r_stage: np.ndarray
    p_terminal: np.ndarray

    def __post_init__(self):
        q = as_symmetric(self.q_stage, name="Q_stage")
        r = as_symmetric(self.r_stage, name="R_stage")
        p = as_symmetric(self.p_terminal, name="P_terminal")
        if np.linalg.eigvalsh(q)[0] < -1e-10:
            raise ValidationError("Q_stage must be PSD")
        if np.linalg.eigvalsh(r)[0] <= 0:
            raise ValidationError("R_stage must be PD")
        if np.linalg.eigvalsh(p)[0] < -1e-10:
            raise ValidationError("P_terminal must be PSD")
        object.__setattr__(self, "q_stage", q)
        object.__setattr__(self, "r_stage", r)
        object.__setattr__(self, "p_terminal", p)


@dataclass(frozen=True, eq=False)
class ControllerGains:
    """Feedback gain and closed-loop matrix A + B K (must be Schur)."""

    k_gain: np.ndarray
    a_cl: np.ndarray

    def __post_init__(self):
        rho = spectral_radius(self.a_cl)
        if rho >= 1.0:
            raise ValidationError(
                f"closed loop must be Schur, got spectral radius {rho:.6f}"
            )


def lqr_design(model: SystemModel, q_stage, r_stage, tol: float = DARE_TOL,
               max_iter: int = DARE_MAX_ITER):
    """Infinite-horizon LQR: terminal cost from the control DARE and
    K = -(R + B'PB)^-1 B'PA."""
    q_stage = as_symmetric(q_stage, name="Q_stage")
    r_stage = as_symmetric(r_stage, name="R_stage")
    p_term = dare(model.a, model.b, q_stage, r_stage, tol=tol, max_iter=max_iter)
    bpb = r_stage + model.b.T @ p_term @ model.b
    k_gain = -np.linalg.solve(bpb, model.b.T @ p_term @ model.a)
    a_cl = model.a + model.b @ k_gain
    assert spectral_radius(a_cl) < 1.0, "LQR closed loop must be Schur"
    gains = ControllerGains(k_gain=k_gain, a_cl=a_cl)
    cost = CostSpec(q_stage=q_stage, r_stage=r_stage, p_terminal=p_term)
    return gains, cost


class MpcProblem:
    """Immutable tightened MPC data plus the precomputed condensation.

    ``state_sets``/``input_sets`` are the per-step constraint sequences of
    length N; ``terminal`` constrains the N-th nominal state. ``noise_set``
    is the estimator-disturbance confidence set used by the feasibility
    probe (None for the noise-free baseline problem).
    """

    def __init__(self, model: SystemModel, gains: ControllerGains,
                 cost: CostSpec, horizon: int, state_sets, input_sets,
                 terminal: HPolytope, noise_set: Zonotope | None = None):
        if horizon < 1:
            raise ValidationError("MPC horizon must be at least 1")
        if len(state_sets) != horizon or len(input_sets) != horizon:
            raise ValidationError("state/input set lists must have length N")
        for i, s in enumerate(state_sets):
            if s.is_empty():
                raise EmptySetError(f"state set {i} is empty", stage="MpcProblem")
        for i, s in enumerate(input_sets):
            if s.is_empty():
                raise EmptySetError(f"input set {i} is empty", stage="MpcProblem")
        if terminal.is_empty():
            raise EmptySetError("terminal set is empty", stage="MpcProblem")

        self.model = model
        self.gains = gains
        self.cost = cost
        self.horizon = int(horizon)
        self.state_sets = list(state_sets)
        self.input_sets = list(input_sets)
        self.terminal = terminal
        self.noise_set = noise_set
        self._condense()

    def _condense(self):
        a, b = self.model.a, self.model.b
        n, m = self.model.n_x, self.model.n_u
        big_n = self.horizon

        a_pow = [np.linalg.matrix_power(a, i) for i in range(big_n + 1)]
        gamma = [np.zeros((n, big_n * m)) for _ in range(big_n + 1)]
        for i in range(1, big_n + 1):
            for j in range(i):
                gamma[i][:, j * m:(j + 1) * m] = a_pow[i - 1 - j] @ b

        weights = [self.cost.q_stage] * big_n + [self.cost.p_terminal]
        hess = np.zeros((big_n * m, big_n * m))
        f_lin = np.zeros((big_n * m, n))
        m0 = np.zeros((n, n))
        for i in range(big_n + 1):
            wg = weights[i] @ gamma[i]
            hess += gamma[i].T @ wg
            f_lin += gamma[i].T @ weights[i] @ a_pow[i]
            m0 += a_pow[i].T @ weights[i] @ a_pow[i]
        for i in range(big_n):
            hess[i * m:(i + 1) * m, i * m:(i + 1) * m] += self.cost.r_stage
        hess *= 2.0
        f_lin *= 2.0
        hess = 0.5 * (hess + hess.T)

        g_rows, d_rows, offs = [], [], []
        for i in range(1, big_n):
            s = self.state_sets[i]
            g_rows.append(s.normals @ gamma[i])
            d_rows.append(s.normals @ a_pow[i])
            offs.append(s.offsets)
        for i in range(big_n):
            u = self.input_sets[i]
            sel = np.zeros((m, big_n * m))
            sel[:, i * m:(i + 1) * m] = np.eye(m)
            g_rows.append(u.normals @ sel)
            d_rows.append(np.zeros((u.n_rows, n)))
            offs.append(u.offsets)
        g_rows.append(self.terminal.normals @ gamma[big_n])
        d_rows.append(self.terminal.normals @ a_pow[big_n])
        offs.append(self.terminal.offsets)

        self._a_pow = a_pow
        self._gamma = gamma
        self._hess = hess
        self._f_lin = f_lin
        self._m0 = 0.5 * (m0 + m0.T)
        self._g_mat = np.vstack(g_rows)
        self._d_mat = np.vstack(d_rows)
        self._offsets = np.concatenate(offs)
        self._h_factor = chol_factor(hess, name="MPC Hessian")

    @property
    def n_constraints(self) -> int:
        """Rows of the condensed constraint matrix (prediction steps >= 1)."""
        return self._g_mat.shape[0]


@dataclass(frozen=True, eq=False)
class MpcQp:
    """Condensed QP for one state, keeping the problem handle so solutions
    can be expanded back to state trajectories."""

    problem: MpcProblem
    xhat: np.ndarray
    dense: DenseQp


@dataclass(frozen=True, eq=False)
class MpcSolution:
    status: str
    c_seq: np.ndarray | None = None        # (N, n_u)
    xbar_seq: np.ndarray | None = None     # (N+1, n_x)
    objective: float | None = None
    kkt_stationarity: float = 0.0
    kkt_complementarity: float = 0.0
    max_violation: float = 0.0
    certificate: float | None = None


@dataclass(frozen=True, eq=False)
class ControlResult:
    u: np.ndarray | None
    solution: MpcSolution


def build_qp(problem: MpcProblem, xhat) -> MpcQp:
    """Condense the tightened MPC at ``xhat`` into a DenseQp."""
    x = as_vector(xhat, size=problem.model.n_x, name="xhat")
    rhs = problem._offsets - problem._d_mat @ x
    first = problem.state_sets[0]
    init_violation = float(
        np.maximum(first.normals @ x - first.offsets, 0.0).max(initial=0.0))
    dense = DenseQp(
        hessian=problem._hess,
        linear=problem._f_lin @ x,
        g_mat=problem._g_mat,
        g_vec=rhs,
        constant=float(x @ problem._m0 @ x),
        constant_violation=init_violation,
    )
    return MpcQp(problem=problem, xhat=x, dense=dense)


def qp_solve(qp: MpcQp, max_iter: int = QP_MAX_ITER) -> MpcSolution:
    """Solve the condensed QP and expand the nominal trajectory."""
    res: QpResult = solve_qp(qp.dense, max_iter=max_iter,
                             h_factor=qp.problem._h_factor)
    if res.status != OPTIMAL:
        return MpcSolution(status=INFEASIBLE, certificate=res.certificate,
                           max_violation=res.max_violation)
    problem, x = qp.problem, qp.xhat
    n_u = problem.model.n_u
    c_seq = res.x.reshape(problem.horizon, n_u)
    xbar = np.empty((problem.horizon + 1, problem.model.n_x))
    xbar[0] = x
    for i in range(problem.horizon):
        xbar[i + 1] = problem.model.a @ xbar[i] + problem.model.b @ c_seq[i]
    return MpcSolution(
        status=OPTIMAL, c_seq=c_seq, xbar_seq=xbar, objective=res.objective,
        kkt_stationarity=res.kkt_stationarity,
        kkt_complementarity=res.kkt_complementarity,
        max_violation=res.max_violation,
    )


def control_step(problem: MpcProblem, xhat,
                 max_iter: int = QP_MAX_ITER) -> ControlResult:
    """One receding-horizon step: u = c*_0 when the QP is feasible."""
    solution = qp_solve(build_qp(problem, xhat), max_iter=max_iter)
    u = solution.c_seq[0].copy() if solution.status == OPTIMAL else None
    return ControlResult(u=u, solution=solution)


def baseline_problem(model: SystemModel, gains: ControllerGains,
                     cost: CostSpec, state_set: HPolytope,
                     input_set: HPolytope, horizon: int,
                     rpi_max_iter: int = 200) -> MpcProblem:
    """Deterministic MPC on the raw constraint sets; the terminal set is the
    maximal (disturbance-free) positive invariant set of the closed loop
    inside state_set intersected with {x : Kx in input_set}."""
    k_rows = HPolytope(input_set.normals @ gains.k_gain, input_set.offsets)
    source = state_set.intersect(k_rows)
    terminal = max_rpi(gains.a_cl, Zonotope.zero(model.n_x), source,
                       max_iter=rpi_max_iter)
    return MpcProblem(
        model=model, gains=gains, cost=cost, horizon=horizon,
        state_sets=[state_set] * horizon, input_sets=[input_set] * horizon,
        terminal=terminal, noise_set=None,
    )


def feasibility_probe(problem: MpcProblem, solution: MpcSolution, n_tilde,
                      tol: float = 1e-6) -> bool:
    """Check the shifted candidate built from an optimal solution and a
    realized disturbance against every tightened constraint.

    The candidate appends the terminal feedback K to the shifted input
    sequence and starts from xbar_1 + n_tilde. Recursive feasibility says
    this must pass whenever n_tilde lies in the noise confidence set, which
    is a checked precondition.
    """
    if problem.noise_set is None:
        raise ValidationError("problem has no noise set; probe undefined")
    if solution.status != OPTIMAL:
        raise ValidationError("feasibility probe needs an optimal solution")
    n_tilde = as_vector(n_tilde, size=problem.model.n_x, name="n_tilde")
    if not problem.noise_set.contains(n_tilde, tol=1e-9):
        raise ValidationError("n_tilde lies outside the noise confidence set")

    gains, model, big_n = problem.gains, problem.model, problem.horizon
    a_cl_pow = [np.linalg.matrix_power(gains.a_cl, i) for i in range(big_n)]
    c_star, xbar = solution.c_seq, solution.xbar_seq

    cand_c = np.empty_like(c_star)
    for i in range(big_n - 1):
        cand_c[i] = c_star[i + 1] + gains.k_gain @ (a_cl_pow[i] @ n_tilde)
    cand_c[big_n - 1] = gains.k_gain @ (
        xbar[big_n] + a_cl_pow[big_n - 1] @ n_tilde)

    cand_x = np.empty((big_n + 1, model.n_x))
    cand_x[0] = xbar[1] + n_tilde
    for i in range(big_n):
        cand_x[i + 1] = model.a @ cand_x[i] + model.b @ cand_c[i]

    for i in range(big_n):
        if not problem.state_sets[i].contains(cand_x[i], tol=tol):
            return False
        if not problem.input_sets[i].contains(cand_c[i], tol=tol):
            return False
    return problem.terminal.contains(cand_x[big_n], tol=tol)
