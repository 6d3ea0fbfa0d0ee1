"""Estimator-style controller API.

Both controllers follow the scikit-learn convention: hyperparameters in
``__init__`` (so ``get_params``/``set_params``/``clone`` work), synthesis in
``fit``, and fitted artifacts stored with trailing underscores. ``predict``
maps estimated states to control inputs; ``control_step`` exposes the full
per-state solver result for closed-loop use.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import controller as ctl
from .estimation import (SystemModel, bound_analytic_md,
                         bound_scaled_reference, check_assumptions,
                         kalman_schedule, steady_state_prior)
from .exceptions import OfsmpcError, ValidationError
from .linalg import DARE_MAX_ITER, DARE_TOL
from .qp import OPTIMAL, QP_MAX_ITER
from .sets import (HPolytope, ProbabilityBudget, Zonotope, max_rpi,
                   pontryagin_diff, tighten_input, tighten_state,
                   terminal_set, ubcs)

BOUND_METHODS = ("auto", "analytic_md", "scaled_reference")


def _confidence_set(sigma, probability: float, dim: int) -> Zonotope:
    # probability >= 1 is the degenerate testing toggle: a zero set.
    if probability >= 1.0:
        return Zonotope.zero(dim)
    budget = ProbabilityBudget.uniform(probability, 2 * dim)
    return ubcs(sigma, budget)


class _ControlMixin:
    """Shared predict/control_step surface over a fitted ``problem_``."""

    def control_step(self, xhat) -> ctl.ControlResult:
        self._require_fitted()
        return ctl.control_step(self.problem_, xhat, max_iter=self.qp_max_iter)

    def predict(self, X) -> np.ndarray:
        """Control inputs for one state (1-D) or a batch of states (2-D)."""
        self._require_fitted()
        arr = np.asarray(X, dtype=float)
        single = arr.ndim == 1
        states = np.atleast_2d(arr)
        if states.shape[1] != self.problem_.model.n_x:
            raise ValidationError(
                f"expected states of dimension {self.problem_.model.n_x}, "
                f"got shape {arr.shape}"
            )
        out = np.empty((states.shape[0], self.problem_.model.n_u))
        for i, xhat in enumerate(states):
            step = self.control_step(xhat)
            if step.solution.status != OPTIMAL:
                raise OfsmpcError(f"MPC infeasible for sample {i}")
            out[i] = step.u
        return out[0] if single else out

    def _require_fitted(self):
        if getattr(self, "problem_", None) is None:
            raise NotFittedError(
                f"{type(self).__name__} must be fitted before use")


class SmpcController(_ControlMixin, BaseEstimator):
    """Output-feedback stochastic MPC with shrinking-tube tightening.

    ``fit`` takes a :class:`SystemModel` and synthesizes the whole pipeline:
    Kalman schedule, uniform covariance bounds, confidence sets for the
    estimation error (level 1 - p_state) and the estimator disturbance
    (level 1 - p_fail), tightened state/input sequences, and the tightened
    RPI terminal set.

    Setting ``p_state`` or ``p_fail`` to 1.0 degenerates the corresponding
    confidence set to {0} (useful for zero-uncertainty testing).
    """

    def __init__(self, state_set=None, input_set=None, horizon=5,
                 q_stage=None, r_stage=None, p_state=0.05, p_fail=0.05,
                 bound_method="auto", rpi_max_iter=200,
                 dare_tol=DARE_TOL, dare_max_iter=DARE_MAX_ITER,
                 qp_max_iter=QP_MAX_ITER):
        self.state_set = state_set
        self.input_set = input_set
        self.horizon = horizon
        self.q_stage = q_stage
        self.r_stage = r_stage
        self.p_state = p_state
        self.p_fail = p_fail
        self.bound_method = bound_method
        self.rpi_max_iter = rpi_max_iter
        self.dare_tol = dare_tol
        self.dare_max_iter = dare_max_iter
        self.qp_max_iter = qp_max_iter

    def fit(self, model: SystemModel, y=None):
        if not isinstance(model, SystemModel):
            raise ValidationError("fit expects a SystemModel")
        if self.state_set is None or self.input_set is None:
            raise ValidationError("state_set and input_set are required")
        if self.bound_method not in BOUND_METHODS:
            raise ValidationError(f"bound_method must be one of {BOUND_METHODS}")

        self.schedule_ = kalman_schedule(model)
        self.p_inf_ = steady_state_prior(model, tol=self.dare_tol,
                                         max_iter=self.dare_max_iter)
        self.assumptions_ = check_assumptions(model, self.p_inf_)
        method = self.bound_method
        if method == "auto":
            method = "analytic_md" if self.assumptions_.all_hold() \
                else "scaled_reference"
        if method == "analytic_md":
            self.bound_ = bound_analytic_md(model, self.p_inf_, self.schedule_)
        else:
            self.bound_ = bound_scaled_reference(self.schedule_, self.p_inf_)

        n = model.n_x
        self.error_set_ = _confidence_set(self.bound_.p_bar, self.p_state, n)
        self.noise_set_ = _confidence_set(self.bound_.phi_bar, self.p_fail, n)

        self.gains_, self.cost_ = ctl.lqr_design(
            model, self.q_stage, self.r_stage,
            tol=self.dare_tol, max_iter=self.dare_max_iter)

        self.xhat_set_ = pontryagin_diff(self.state_set, self.error_set_)
        acl, k_gain = self.gains_.a_cl, self.gains_.k_gain
        state_sets = tighten_state(self.xhat_set_, self.noise_set_, acl,
                                   self.horizon)
        input_sets = tighten_input(self.input_set, self.noise_set_, k_gain,
                                   acl, self.horizon)

        k_rows = HPolytope(self.input_set.normals @ k_gain,
                           self.input_set.offsets)
        self.rpi_set_ = max_rpi(acl, self.noise_set_,
                                self.xhat_set_.intersect(k_rows),
                                max_iter=self.rpi_max_iter)
        self.terminal_ = terminal_set(self.rpi_set_, self.noise_set_, acl,
                                      self.horizon)

        self.problem_ = ctl.MpcProblem(
            model=model, gains=self.gains_, cost=self.cost_,
            horizon=self.horizon, state_sets=state_sets,
            input_sets=input_sets, terminal=self.terminal_,
            noise_set=self.noise_set_,
        )
        return self


class BaselineMpc(_ControlMixin, BaseEstimator):
    """Deterministic MPC that trusts the state estimate: raw constraint
    sets at every step, terminal set from the noise-free invariant set."""

    def __init__(self, state_set=None, input_set=None, horizon=5,
                 q_stage=None, r_stage=None, rpi_max_iter=200,
                 dare_tol=DARE_TOL, dare_max_iter=DARE_MAX_ITER,
                 qp_max_iter=QP_MAX_ITER):
        self.state_set = state_set
        self.input_set = input_set
        self.horizon = horizon
        self.q_stage = q_stage
        self.r_stage = r_stage
        self.rpi_max_iter = rpi_max_iter
        self.dare_tol = dare_tol
        self.dare_max_iter = dare_max_iter
        self.qp_max_iter = qp_max_iter

    def fit(self, model: SystemModel, y=None):
        if not isinstance(model, SystemModel):
            raise ValidationError("fit expects a SystemModel")
        if self.state_set is None or self.input_set is None:
            raise ValidationError("state_set and input_set are required")
        self.schedule_ = kalman_schedule(model)
        self.gains_, self.cost_ = ctl.lqr_design(
            model, self.q_stage, self.r_stage,
            tol=self.dare_tol, max_iter=self.dare_max_iter)
        self.problem_ = ctl.baseline_problem(
            model, self.gains_, self.cost_, self.state_set, self.input_set,
            self.horizon, rpi_max_iter=self.rpi_max_iter)
        self.terminal_ = self.problem_.terminal
        return self
