"""Output-feedback stochastic MPC for linear Gaussian systems.

Kalman-filter scheduling with uniform covariance bounds, zonotopic
confidence sets, shrinking-tube constraint tightening, a QP-based
receding-horizon controller, and a reproducible Monte-Carlo harness.
"""

from .controller import (ControllerGains, ControlResult, CostSpec,
                         MpcProblem, MpcSolution, baseline_problem, build_qp,
                         control_step, feasibility_probe, lqr_design,
                         qp_solve)
from .estimation import (AssumptionReport, CovarianceBound, FilterState,
                         KalmanSchedule, SystemModel, bound_analytic_md,
                         bound_scaled_reference, check_assumptions,
                         filter_init, filter_step, kalman_schedule,
                         steady_state_prior)
from .estimators import BaselineMpc, SmpcController
from .exceptions import (AssumptionError, ConvergenceError, EmptySetError,
                         FactorizationError, IterationLimitError,
                         OfsmpcError, UnboundedError, ValidationError)
from .linalg import SymEigResult, chol_solve, dare, psd_leq, sym_eig
from .scenario import (Scenario, Tolerances, build_baseline,
                       build_controller, emit_scenario, load_scenario,
                       paper_scenario, parse_scenario)
from .sets import (HPolytope, ProbabilityBudget, Zonotope, inv_norm_cdf,
                   linear_map, lp_support, max_rpi, minkowski_sum,
                   poly_includes, pontryagin_diff, terminal_set,
                   tighten_input, tighten_state, ubcs)
from .simulate import (McReport, RngStream, SimTrace, gaussian_draw,
                       monte_carlo, simulate_run)

__version__ = "0.1.0"

__all__ = [
    "AssumptionError", "AssumptionReport", "BaselineMpc", "ControlResult",
    "ControllerGains", "ConvergenceError", "CostSpec", "CovarianceBound",
    "EmptySetError", "FactorizationError", "FilterState", "HPolytope",
    "IterationLimitError", "KalmanSchedule", "McReport", "MpcProblem",
    "MpcSolution", "OfsmpcError", "ProbabilityBudget", "RngStream",
    "Scenario", "SimTrace", "SmpcController", "SymEigResult", "SystemModel",
    "Tolerances", "UnboundedError", "ValidationError", "Zonotope",
    "baseline_problem", "bound_analytic_md", "bound_scaled_reference",
    "build_baseline", "build_controller", "build_qp", "check_assumptions",
    "chol_solve", "control_step", "dare", "emit_scenario",
    "feasibility_probe", "filter_init", "filter_step", "gaussian_draw",
    "inv_norm_cdf", "kalman_schedule", "linear_map", "load_scenario",
    "lp_support", "lqr_design", "max_rpi", "minkowski_sum", "monte_carlo",
    "paper_scenario", "parse_scenario", "poly_includes", "pontryagin_diff",
    "psd_leq", "qp_solve", "simulate_run", "steady_state_prior", "sym_eig",
    "terminal_set", "tighten_input", "tighten_state", "ubcs",
]
