"""Kalman-filter scheduling and uniform covariance upper bounds.

For a finite task of ``T`` steps the filter gains and covariances are a
pure function of the model, so they are precomputed once into a
:class:`KalmanSchedule`. The bound constructors produce a single pair
``(P_bar, Phi_bar)`` dominating the whole schedule in the Loewner order,
either from the closed-form steady-state argument (``analytic_md``) or by
minimally scaling the steady-state prior shape (``scaled_reference``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import AssumptionError, FactorizationError, OfsmpcError
from .linalg import DARE_MAX_ITER, DARE_TOL, dare, psd_leq
from .validation import ValidationError, as_matrix, as_square, as_symmetric, as_vector

SCALED_REFERENCE_EPS = 1e-10


def _check_psd(m, name):
    if np.linalg.eigvalsh(m)[0] < -1e-10 * (1.0 + np.abs(m).max()):
        raise ValidationError(f"{name} must be positive semidefinite")


def _check_pd(m, name):
    if np.linalg.eigvalsh(m)[0] <= 0.0:
        raise ValidationError(f"{name} must be positive definite")


@dataclass(frozen=True)
class SystemModel:
    """Linear Gaussian plant x+ = Ax + Bu + w, y = Cx + v over ``horizon`` steps.

    ``noise_cov_w``/``noise_cov_v`` are the process and measurement noise
    covariances, ``init_mean``/``init_cov`` the Gaussian initial-state
    statistics. Controllability of (A, B) and observability of (A, C) are
    enforced at construction.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    noise_cov_w: np.ndarray
    noise_cov_v: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    horizon: int

    def __post_init__(self):
        a = as_square(self.a, name="A")
        n = a.shape[0]
        b = as_matrix(self.b, rows=n, name="B")
        c = as_matrix(self.c, cols=n, name="C")
        qw = as_symmetric(self.noise_cov_w, name="Qw")
        rv = as_symmetric(self.noise_cov_v, name="Rv")
        sigma0 = as_symmetric(self.init_cov, name="Sigma0")
        mu0 = as_vector(self.init_mean, size=n, name="mu0")
        if qw.shape[0] != n or sigma0.shape[0] != n:
            raise ValidationError("Qw and Sigma0 must match the state dimension")
        if rv.shape[0] != c.shape[0]:
            raise ValidationError("Rv must match the output dimension")
        _check_psd(qw, "Qw")
        _check_psd(sigma0, "Sigma0")
        _check_pd(rv, "Rv")
        if int(self.horizon) < 1:
            raise ValidationError("horizon must be at least 1")

        ctrb = np.hstack([np.linalg.matrix_power(a, i) @ b for i in range(n)])
        if np.linalg.matrix_rank(ctrb) < n:
            raise ValidationError("(A, B) must be controllable")
        obsv = np.vstack([c @ np.linalg.matrix_power(a, i) for i in range(n)])
        if np.linalg.matrix_rank(obsv) < n:
            raise ValidationError("(A, C) must be observable")

        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "noise_cov_w", qw)
        object.__setattr__(self, "noise_cov_v", rv)
        object.__setattr__(self, "init_mean", mu0)
        object.__setattr__(self, "init_cov", sigma0)
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]

    @property
    def n_y(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class KalmanSchedule:
    """Per-step filter gains and covariances for k = 0..T-1.

    ``noise_cov`` holds the estimator-disturbance covariances Phi_k for
    k = 0..T-2 only, since Phi_k involves the gain at step k+1.
    """

    gains: np.ndarray        # (T, n_x, n_y)
    prior_cov: np.ndarray    # (T, n_x, n_x)
    post_cov: np.ndarray     # (T, n_x, n_x)
    noise_cov: np.ndarray    # (T-1, n_x, n_x)

    @property
    def horizon(self) -> int:
        return self.gains.shape[0]


@dataclass
class FilterState:
    xhat: np.ndarray
    k: int


@dataclass(frozen=True)
class AssumptionReport:
    assumption1: bool   # Sigma0 <= P_inf
    assumption2: bool   # A nonsingular

    def all_hold(self) -> bool:
        return self.assumption1 and self.assumption2


@dataclass(frozen=True)
class CovarianceBound:
    """Uniform Loewner upper bounds on the schedule covariances."""

    p_bar: np.ndarray
    phi_bar: np.ndarray
    method: str
    p_inf: np.ndarray


def kalman_schedule(model: SystemModel) -> KalmanSchedule:
    """Run the covariance/gain recursion over the task horizon."""
    a, c = model.a, model.c
    qw, rv = model.noise_cov_w, model.noise_cov_v
    t, n = model.horizon, model.n_x

    gains = np.empty((t, n, model.n_y))
    prior = np.empty((t, n, n))
    post = np.empty((t, n, n))
    innov = np.empty((t, model.n_y, model.n_y))

    p_minus = model.init_cov.copy()
    for k in range(t):
        s = c @ p_minus @ c.T + rv
        try:
            l_k = np.linalg.solve(s, (p_minus @ c.T).T).T
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                f"singular innovation covariance at step {k}"
            ) from exc
        p_k = (np.eye(n) - l_k @ c) @ p_minus
        p_k = 0.5 * (p_k + p_k.T)
        gains[k], prior[k], post[k], innov[k] = l_k, p_minus, p_k, s
        p_minus = a @ p_k @ a.T + qw
        p_minus = 0.5 * (p_minus + p_minus.T)

    noise = np.empty((t - 1, n, n))
    for k in range(t - 1):
        phi = gains[k + 1] @ innov[k + 1] @ gains[k + 1].T
        noise[k] = 0.5 * (phi + phi.T)
    return KalmanSchedule(gains, prior, post, noise)


def filter_init(model: SystemModel, y0, schedule: KalmanSchedule) -> FilterState:
    """Initial estimate xhat_0 = mu0 + L_0 (y0 - C mu0)."""
    y0 = as_vector(y0, size=model.n_y, name="y0")
    innovation = y0 - model.c @ model.init_mean
    return FilterState(xhat=model.init_mean + schedule.gains[0] @ innovation, k=0)


def filter_step(state: FilterState, u, y_next, model: SystemModel,
                schedule: KalmanSchedule) -> FilterState:
    """Predict with (u, A, B), then correct with the step-(k+1) gain."""
    if state.k >= model.horizon - 1:
        raise ValidationError(
            f"filter step index {state.k} is out of schedule range "
            f"(needs gain at step {state.k + 1}, horizon {model.horizon})"
        )
    u = as_vector(u, size=model.n_u, name="u")
    y_next = as_vector(y_next, size=model.n_y, name="y_next")
    x_pred = model.a @ state.xhat + model.b @ u
    gain = schedule.gains[state.k + 1]
    xhat = x_pred + gain @ (y_next - model.c @ x_pred)
    return FilterState(xhat=xhat, k=state.k + 1)


def steady_state_prior(model: SystemModel, tol: float = DARE_TOL,
                       max_iter: int = DARE_MAX_ITER) -> np.ndarray:
    """Steady-state prior covariance P_inf (filter-form Riccati fixed point)."""
    return dare(model.a.T, model.c.T, model.noise_cov_w, model.noise_cov_v,
                tol=tol, max_iter=max_iter)


def check_assumptions(model: SystemModel, p_inf, tol: float = 1e-9) -> AssumptionReport:
    p_inf = as_symmetric(p_inf, name="P_inf")
    a1 = psd_leq(model.init_cov, p_inf, tol)
    a2 = abs(float(np.linalg.det(model.a))) > 1e-12
    return AssumptionReport(assumption1=a1, assumption2=a2)


def _verify_bound(schedule: KalmanSchedule, p_bar, phi_bar, tol: float = 1e-9):
    for k in range(schedule.horizon):
        if not psd_leq(schedule.post_cov[k], p_bar, tol):
            raise OfsmpcError(f"covariance bound violated: P_{k} exceeds P_bar")
    for k in range(schedule.noise_cov.shape[0]):
        if not psd_leq(schedule.noise_cov[k], phi_bar, tol):
            raise OfsmpcError(f"covariance bound violated: Phi_{k} exceeds Phi_bar")


def bound_analytic_md(model: SystemModel, p_inf,
                      schedule: KalmanSchedule) -> CovarianceBound:
    """Closed-form uniform bounds P_bar = A^-1 (P_inf - Qw) A^-T and
    Phi_bar = P_inf.

    Requires Sigma0 <= P_inf and nonsingular A; refuses otherwise. The
    returned bounds are re-verified against the schedule.
    """
    p_inf = as_symmetric(p_inf, name="P_inf")
    report = check_assumptions(model, p_inf)
    if not report.all_hold():
        raise AssumptionError(
            "analytic_md bound requires Sigma0 <= P_inf and nonsingular A "
            f"(assumption1={report.assumption1}, assumption2={report.assumption2})"
        )
    a_inv = np.linalg.inv(model.a)
    p_bar = a_inv @ (p_inf - model.noise_cov_w) @ a_inv.T
    p_bar = 0.5 * (p_bar + p_bar.T)
    bound = CovarianceBound(p_bar=p_bar, phi_bar=p_inf, method="analytic_md",
                            p_inf=p_inf)
    _verify_bound(schedule, bound.p_bar, bound.phi_bar)
    return bound


def bound_scaled_reference(schedule: KalmanSchedule, p_inf,
                           eps: float = SCALED_REFERENCE_EPS) -> CovarianceBound:
    """Uniform bounds with the steady-state prior as the fixed shape.

    P_bar = alpha_P * (P_inf + eps I) where alpha_P is the largest
    generalized eigenvalue of any schedule covariance against the
    reference, so the bound holds by construction with the smallest
    possible scale for that shape. Phi_bar is built the same way over the
    estimator-disturbance covariances.
    """
    p_inf = as_symmetric(p_inf, name="P_inf")
    ref = p_inf + eps * np.eye(p_inf.shape[0])

    def scale_for(covs):
        alpha = 0.0
        for cov in covs:
            lam = scipy.linalg.eigh(cov, ref, eigvals_only=True)[-1]
            alpha = max(alpha, float(lam))
        return alpha

    p_bar = scale_for(schedule.post_cov) * ref
    phi_bar = scale_for(schedule.noise_cov) * ref
    bound = CovarianceBound(p_bar=p_bar, phi_bar=phi_bar,
                            method="scaled_reference", p_inf=p_inf)
    _verify_bound(schedule, bound.p_bar, bound.phi_bar)
    return bound
