"""Closed-loop simulation and seeded parallel Monte-Carlo campaigns.

Each run owns a counter-based random stream keyed by (base_seed, run index),
so campaigns are reproducible and independent of how runs are distributed
over workers. Aggregation folds per-run integer summaries in run order,
which keeps reports byte-identical across worker counts.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .estimation import (FilterState, KalmanSchedule, SystemModel,
                         filter_init, filter_step)
from .exceptions import IterationLimitError, ValidationError
from .linalg import psd_sqrt
from .qp import OPTIMAL
from .validation import as_symmetric, as_vector

STATUS_SUCCESS = "success"
STATUS_INFEASIBLE = "infeasible"
STATUS_ITERATION_LIMIT = "iteration_limit"


@dataclass
class RngStream:
    """Counter-based Gaussian stream: Philox keyed by (seed, stream_index)."""

    seed: int
    stream_index: int

    def __post_init__(self):
        key = np.array([self.seed % 2**64, self.stream_index % 2**64],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, size: int) -> np.ndarray:
        return self._gen.standard_normal(size)


def gaussian_draw(stream: RngStream, mean, cov) -> np.ndarray:
    """Draw mean + L z with L the symmetric PSD square root of ``cov``."""
    mean = as_vector(mean, name="mean")
    cov = as_symmetric(cov, name="cov")
    factor = psd_sqrt(cov)
    return mean + factor @ stream.standard_normal(mean.size)


@dataclass(eq=False)
class SimTrace:
    """Per-step record of one closed-loop run.

    Rows cover the visited steps k = 0..last. ``control_error0`` is the
    first-step control error xhat_k - xbar_{0|k}; the MPC initializes the
    nominal state at the estimate, so it is identically zero and stored
    only to make probe logs self-contained.
    """

    status: str
    fail_step: int | None
    x: np.ndarray
    y: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    feasible: np.ndarray
    violated: np.ndarray
    objective: np.ndarray
    control_error0: np.ndarray

    @property
    def est_err(self) -> np.ndarray:
        return self.x - self.xhat

    @property
    def n_steps(self) -> int:
        return self.x.shape[0]

    @property
    def n_violations(self) -> int:
        return int(self.violated.sum())


def simulate_run(model: SystemModel, schedule: KalmanSchedule, controller,
                 stream: RngStream) -> SimTrace:
    """Simulate the plant under the Kalman filter and a fitted controller.

    The controller must expose ``control_step(xhat)`` and ``state_set`` (the
    original, untightened state constraint used for violation flags). A run
    terminates at the first infeasible MPC step; a solver iteration-limit
    aborts with its own status so campaigns can report it separately.
    """
    t, n_x, n_u, n_y = model.horizon, model.n_x, model.n_u, model.n_y
    state_set = controller.state_set
    w_factor = psd_sqrt(model.noise_cov_w)
    v_factor = psd_sqrt(model.noise_cov_v)
    x0_factor = psd_sqrt(model.init_cov)

    xs = np.zeros((t, n_x))
    ys = np.zeros((t, n_y))
    xhats = np.zeros((t, n_x))
    us = np.full((t, n_u), np.nan)
    feasible = np.zeros(t, dtype=bool)
    violated = np.zeros(t, dtype=bool)
    objective = np.full(t, np.nan)

    x = model.init_mean + x0_factor @ stream.standard_normal(n_x)
    y = model.c @ x + v_factor @ stream.standard_normal(n_y)
    fstate = filter_init(model, y, schedule)

    status = STATUS_SUCCESS
    fail_step = None
    steps = t
    for k in range(t):
        xs[k], ys[k], xhats[k] = x, y, fstate.xhat
        violated[k] = not state_set.contains(x, tol=0.0)
        try:
            step = controller.control_step(fstate.xhat)
        except IterationLimitError:
            status, fail_step, steps = STATUS_ITERATION_LIMIT, k, k + 1
            break
        if step.solution.status != OPTIMAL:
            status, fail_step, steps = STATUS_INFEASIBLE, k, k + 1
            break
        feasible[k] = True
        us[k] = step.u
        objective[k] = step.solution.objective
        if k == t - 1:
            break
        w = w_factor @ stream.standard_normal(n_x)
        v = v_factor @ stream.standard_normal(n_y)
        x = model.a @ x + model.b @ step.u + w
        y = model.c @ x + v
        fstate = filter_step(fstate, step.u, y, model, schedule)

    sl = slice(0, steps)
    return SimTrace(
        status=status, fail_step=fail_step, x=xs[sl], y=ys[sl],
        xhat=xhats[sl], u=us[sl], feasible=feasible[sl],
        violated=violated[sl], objective=objective[sl],
        control_error0=np.zeros((steps, n_x)),
    )


@dataclass(frozen=True)
class McReport:
    """Campaign statistics.

    ``task_failure_rate`` counts runs that lost feasibility at some step
    k >= 1, over runs feasible at k = 0. ``violation_rate`` pools state
    violations over the steps of fully successful runs only. Runs aborted
    by the solver iteration cap are excluded from both statistics and
    must be zero for a trustworthy campaign.
    """

    runs_total: int
    runs_initially_infeasible: int
    runs_failed: int
    task_failure_rate: float
    violation_count: int
    successful_step_count: int
    violation_rate: float
    theoretical_failure_bound: float
    runs_iteration_limit: int = 0


def _summarize(trace: SimTrace):
    return (trace.status, trace.fail_step, trace.n_violations, trace.n_steps)


_WORKER_CTX = {}


def _worker_init(model, schedule, controller, base_seed):
    _WORKER_CTX["args"] = (model, schedule, controller, base_seed)


def _worker_run(run_index: int):
    model, schedule, controller, base_seed = _WORKER_CTX["args"]
    trace = simulate_run(model, schedule, controller,
                         RngStream(base_seed, run_index))
    return _summarize(trace)


def monte_carlo(model: SystemModel, schedule: KalmanSchedule, controller,
                n_runs: int, base_seed: int, worker_count: int = 1,
                p_fail: float | None = None) -> McReport:
    """Run ``n_runs`` independent closed-loop simulations and aggregate.

    ``worker_count`` > 1 distributes runs over processes; results are a pure
    function of (model, controller, base_seed, n_runs) regardless.
    ``p_fail`` feeds the reported theoretical failure bound
    1 - (1 - p_fail)^(T-1).
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be at least 1")
    if worker_count > 1:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, n_runs // (worker_count * 8))
        with ctx.Pool(worker_count, initializer=_worker_init,
                      initargs=(model, schedule, controller, base_seed)) as pool:
            summaries = pool.map(_worker_run, range(n_runs), chunksize=chunk)
    else:
        summaries = []
        for i in range(n_runs):
            trace = simulate_run(model, schedule, controller,
                                 RngStream(base_seed, i))
            summaries.append(_summarize(trace))

    init_infeasible = failed = iteration_limit = 0
    violations = success_steps = 0
    for status, fail_step, n_viol, n_steps in summaries:
        if status == STATUS_ITERATION_LIMIT:
            iteration_limit += 1
        elif status == STATUS_INFEASIBLE and fail_step == 0:
            init_infeasible += 1
        elif status == STATUS_INFEASIBLE:
            failed += 1
        else:
            violations += n_viol
            success_steps += n_steps

    denom = n_runs - init_infeasible
    failure_rate = failed / denom if denom > 0 else float("nan")
    violation_rate = (violations / success_steps if success_steps > 0
                      else float("nan"))
    bound = (1.0 - (1.0 - p_fail) ** (model.horizon - 1)
             if p_fail is not None else float("nan"))
    return McReport(
        runs_total=n_runs,
        runs_initially_infeasible=init_infeasible,
        runs_failed=failed,
        task_failure_rate=failure_rate,
        violation_count=violations,
        successful_step_count=success_steps,
        violation_rate=violation_rate,
        theoretical_failure_bound=bound,
        runs_iteration_limit=iteration_limit,
    )


# ---------------------------------------------------------------------------
# text output

REPORT_FIELDS = (
    "runs_total", "runs_initially_infeasible", "runs_failed",
    "task_failure_rate", "violation_count", "successful_step_count",
    "violation_rate", "theoretical_failure_bound", "runs_iteration_limit",
)


def format_report(report: McReport, header: str = "") -> str:
    lines = [header] if header else []
    for name in REPORT_FIELDS:
        value = getattr(report, name)
        lines.append(f"{name} = {value!r}")
    return "\n".join(lines) + "\n"


def report_csv_header() -> str:
    return "label," + ",".join(REPORT_FIELDS) + "\n"


def report_csv_row(report: McReport, label: str) -> str:
    values = [repr(getattr(report, name)) for name in REPORT_FIELDS]
    return label + "," + ",".join(values) + "\n"


def trace_csv(trace: SimTrace, model: SystemModel) -> str:
    cols = (["k"]
            + [f"x{i}" for i in range(model.n_x)]
            + [f"xhat{i}" for i in range(model.n_x)]
            + [f"y{i}" for i in range(model.n_y)]
            + [f"u{i}" for i in range(model.n_u)]
            + ["feasible", "violated"])
    lines = [",".join(cols)]
    for k in range(trace.n_steps):
        row = ([str(k)]
               + [repr(float(v)) for v in trace.x[k]]
               + [repr(float(v)) for v in trace.xhat[k]]
               + [repr(float(v)) for v in trace.y[k]]
               + [repr(float(v)) for v in trace.u[k]]
               + [str(int(trace.feasible[k])), str(int(trace.violated[k]))])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
