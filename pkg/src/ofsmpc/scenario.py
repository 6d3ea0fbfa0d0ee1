"""Scenario files: load, validate, emit, and turn into fitted objects.

A scenario is a YAML document with four fixed tables (system, constraints,
mpc, mc) plus optional tolerance overrides. Validation is exhaustive:
unknown keys anywhere are rejected, matrices are given row by row, and all
referenced model/set invariants are checked before anything runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .estimation import SystemModel
from .estimators import BOUND_METHODS, BaselineMpc, SmpcController
from .exceptions import ValidationError
from .linalg import DARE_MAX_ITER, DARE_TOL
from .qp import QP_MAX_ITER
from .sets import HPolytope


@dataclass(frozen=True)
class Tolerances:
    dare_tol: float = DARE_TOL
    dare_max_iter: int = DARE_MAX_ITER
    psd_tol: float = 1e-9
    support_tol: float = 1e-8
    qp_max_iter: int = QP_MAX_ITER
    rpi_max_iter: int = 200


@dataclass(frozen=True, eq=False)
class Scenario:
    model: SystemModel
    state_set: HPolytope
    input_set: HPolytope
    p_x: float
    p_f: float
    p_f_from_target: bool
    horizon: int
    q_lqr: np.ndarray
    r_lqr: np.ndarray
    bound_method: str
    budget_split: str
    n_runs: int
    base_seed: int
    workers: int
    tolerances: Tolerances


def _require_keys(mapping, allowed, required, where):
    if not isinstance(mapping, dict):
        raise ValidationError(f"{where} must be a mapping")
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(mapping)
    if missing:
        raise ValidationError(f"missing keys in {where}: {sorted(missing)}")


def _polytope(block, where) -> HPolytope:
    _require_keys(block, ("normals", "offsets"), ("normals", "offsets"), where)
    return HPolytope(np.array(block["normals"], dtype=float),
                     np.array(block["offsets"], dtype=float))


def _probability(value, name, allow_degenerate=False) -> float:
    p = float(value)
    if allow_degenerate and p == 1.0:
        return p
    if not (0.0 < p < 1.0):
        raise ValidationError(f"{name} must lie in (0, 1), got {p}")
    return p


def parse_scenario(data: dict) -> Scenario:
    _require_keys(data, ("system", "constraints", "mpc", "mc", "tolerances"),
                  ("system", "constraints", "mpc", "mc"), "scenario")

    sys_block = data["system"]
    _require_keys(sys_block,
                  ("A", "B", "C", "Q", "R", "mu0", "Sigma0", "T"),
                  ("A", "B", "C", "Q", "R", "mu0", "Sigma0", "T"),
                  "system")
    model = SystemModel(
        a=np.array(sys_block["A"], dtype=float),
        b=np.array(sys_block["B"], dtype=float),
        c=np.array(sys_block["C"], dtype=float),
        noise_cov_w=np.array(sys_block["Q"], dtype=float),
        noise_cov_v=np.array(sys_block["R"], dtype=float),
        init_mean=np.array(sys_block["mu0"], dtype=float),
        init_cov=np.array(sys_block["Sigma0"], dtype=float),
        horizon=int(sys_block["T"]),
    )

    con = data["constraints"]
    _require_keys(con, ("X", "U", "p_x", "p_f", "target_task_success"),
                  ("X", "U", "p_x"), "constraints")
    state_set = _polytope(con["X"], "constraints.X")
    input_set = _polytope(con["U"], "constraints.U")
    if state_set.dim != model.n_x:
        raise ValidationError("X dimension must match the state dimension")
    if input_set.dim != model.n_u:
        raise ValidationError("U dimension must match the input dimension")
    p_x = _probability(con["p_x"], "p_x", allow_degenerate=True)
    if ("p_f" in con) == ("target_task_success" in con):
        raise ValidationError(
            "give exactly one of constraints.p_f or "
            "constraints.target_task_success")
    if "p_f" in con:
        p_f = _probability(con["p_f"], "p_f", allow_degenerate=True)
        from_target = False
    else:
        target = _probability(con["target_task_success"], "target_task_success")
        p_f = 1.0 - target ** (1.0 / (model.horizon - 1))
        from_target = True

    mpc = data["mpc"]
    _require_keys(mpc, ("N", "Q_lqr", "R_lqr", "bound_method", "budget_split"),
                  ("N", "Q_lqr", "R_lqr"), "mpc")
    horizon = int(mpc["N"])
    if horizon < 1:
        raise ValidationError("mpc.N must be at least 1")
    bound_method = mpc.get("bound_method", "auto")
    if bound_method not in BOUND_METHODS:
        raise ValidationError(f"mpc.bound_method must be one of {BOUND_METHODS}")
    budget_split = mpc.get("budget_split", "uniform")
    if budget_split != "uniform":
        raise ValidationError("mpc.budget_split supports only 'uniform'")

    mc = data["mc"]
    _require_keys(mc, ("n_runs", "base_seed", "workers"),
                  ("n_runs", "base_seed"), "mc")
    n_runs = int(mc["n_runs"])
    if n_runs < 1:
        raise ValidationError("mc.n_runs must be at least 1")
    workers = int(mc.get("workers", 1))
    if workers < 1:
        raise ValidationError("mc.workers must be at least 1")

    tol_block = data.get("tolerances") or {}
    defaults = Tolerances()
    _require_keys(tol_block, Tolerances.__dataclass_fields__.keys(), (),
                  "tolerances")
    tol_kwargs = {}
    for name, fdef in Tolerances.__dataclass_fields__.items():
        raw = tol_block.get(name, getattr(defaults, name))
        tol_kwargs[name] = type(getattr(defaults, name))(raw)
        if tol_kwargs[name] <= 0:
            raise ValidationError(f"tolerances.{name} must be positive")

    return Scenario(
        model=model, state_set=state_set, input_set=input_set,
        p_x=p_x, p_f=p_f, p_f_from_target=from_target,
        horizon=horizon,
        q_lqr=np.array(mpc["Q_lqr"], dtype=float),
        r_lqr=np.array(mpc["R_lqr"], dtype=float),
        bound_method=bound_method, budget_split=budget_split,
        n_runs=n_runs, base_seed=int(mc["base_seed"]), workers=workers,
        tolerances=Tolerances(**tol_kwargs),
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValidationError("scenario file must contain a YAML mapping")
    return parse_scenario(data)


def scenario_dict(scn: Scenario) -> dict:
    """Canonical plain-data form of a scenario (inverse of parse)."""
    def mat(m):
        return [[float(v) for v in row] for row in np.atleast_2d(m)]

    def vec(v):
        return [float(x) for x in np.asarray(v).reshape(-1)]

    constraints = {
        "X": {"normals": mat(scn.state_set.normals),
              "offsets": vec(scn.state_set.offsets)},
        "U": {"normals": mat(scn.input_set.normals),
              "offsets": vec(scn.input_set.offsets)},
        "p_x": float(scn.p_x),
    }
    if scn.p_f_from_target:
        target = float((1.0 - scn.p_f) ** (scn.model.horizon - 1))
        constraints["target_task_success"] = target
    else:
        constraints["p_f"] = float(scn.p_f)

    defaults = Tolerances()
    tol = {
        name: getattr(scn.tolerances, name)
        for name in Tolerances.__dataclass_fields__
        if getattr(scn.tolerances, name) != getattr(defaults, name)
    }
    return {
        "system": {
            "A": mat(scn.model.a), "B": mat(scn.model.b),
            "C": mat(scn.model.c), "Q": mat(scn.model.noise_cov_w),
            "R": mat(scn.model.noise_cov_v),
            "mu0": vec(scn.model.init_mean),
            "Sigma0": mat(scn.model.init_cov),
            "T": int(scn.model.horizon),
        },
        "constraints": constraints,
        "mpc": {
            "N": int(scn.horizon),
            "Q_lqr": mat(scn.q_lqr), "R_lqr": mat(scn.r_lqr),
            "bound_method": scn.bound_method,
            "budget_split": scn.budget_split,
        },
        "mc": {
            "n_runs": int(scn.n_runs),
            "base_seed": int(scn.base_seed),
            "workers": int(scn.workers),
        },
        "tolerances": tol,
    }


def emit_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scenario_dict(scn), sort_keys=False,
                          default_flow_style=None)


def build_controller(scn: Scenario) -> SmpcController:
    return SmpcController(
        state_set=scn.state_set, input_set=scn.input_set,
        horizon=scn.horizon, q_stage=scn.q_lqr, r_stage=scn.r_lqr,
        p_state=scn.p_x, p_fail=scn.p_f, bound_method=scn.bound_method,
        rpi_max_iter=scn.tolerances.rpi_max_iter,
        dare_tol=scn.tolerances.dare_tol,
        dare_max_iter=scn.tolerances.dare_max_iter,
        qp_max_iter=scn.tolerances.qp_max_iter,
    )


def build_baseline(scn: Scenario) -> BaselineMpc:
    return BaselineMpc(
        state_set=scn.state_set, input_set=scn.input_set,
        horizon=scn.horizon, q_stage=scn.q_lqr, r_stage=scn.r_lqr,
        rpi_max_iter=scn.tolerances.rpi_max_iter,
        dare_tol=scn.tolerances.dare_tol,
        dare_max_iter=scn.tolerances.dare_max_iter,
        qp_max_iter=scn.tolerances.qp_max_iter,
    )


def paper_scenario(n_runs: int = 10_000, base_seed: int = 2024,
                   workers: int = 2) -> Scenario:
    """The double-integrator reference experiment.

    Regulation from (25, 0) over 50 steps, position-only measurement,
    box state constraints [-8, 80] x [-8, 40] at 95% confidence, hard
    |u| <= 5, LQR weights diag(100, 1) / 1, and a per-step feasibility-loss
    budget derived from a 0.905 task-success target. Noise standard
    deviation is 0.05 on state, measurement, and initial condition, the
    largest level at which the tube synthesis stays comfortably feasible.
    """
    s = 0.0025
    data = {
        "system": {
            "A": [[1.0, 1.0], [0.0, 1.0]],
            "B": [[0.5], [1.0]],
            "C": [[1.0, 0.0]],
            "Q": [[s, 0.0], [0.0, s]],
            "R": [[s]],
            "mu0": [25.0, 0.0],
            "Sigma0": [[s, 0.0], [0.0, s]],
            "T": 50,
        },
        "constraints": {
            "X": {"normals": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                  "offsets": [80.0, 8.0, 40.0, 8.0]},
            "U": {"normals": [[1.0], [-1.0]], "offsets": [5.0, 5.0]},
            "p_x": 0.05,
            "target_task_success": 0.905,
        },
        "mpc": {
            "N": 5,
            "Q_lqr": [[100.0, 0.0], [0.0, 1.0]],
            "R_lqr": [[1.0]],
            "bound_method": "analytic_md",
            "budget_split": "uniform",
        },
        "mc": {"n_runs": n_runs, "base_seed": base_seed, "workers": workers},
    }
    return parse_scenario(data)
