"""Executable property checks for a loaded scenario.

Runs the mathematical guarantees the synthesis relies on as sampling or
exact tests: Loewner bounds over the schedule, confidence-set coverage,
tube monotonicity, the RPI certificate, and the shifted-candidate
recursive-feasibility probe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import feasibility_probe
from .estimation import bound_analytic_md, bound_scaled_reference
from .exceptions import AssumptionError, OfsmpcError
from .linalg import psd_leq, psd_sqrt
from .qp import OPTIMAL
from .scenario import Scenario, build_controller
from .sets import HPolytope, Zonotope, lp_support


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _box_of(poly: HPolytope):
    lo = np.empty(poly.dim)
    hi = np.empty(poly.dim)
    for i in range(poly.dim):
        e = np.zeros(poly.dim)
        e[i] = 1.0
        hi[i], _ = lp_support(poly, e)
        value, _ = lp_support(poly, -e)
        lo[i] = -value
    return lo, hi


def sample_polytope(poly: HPolytope, count: int, rng,
                    max_tries: int = 200) -> np.ndarray:
    """Uniform rejection sampling from the polytope's bounding box."""
    lo, hi = _box_of(poly)
    out = []
    for _ in range(max_tries):
        pts = rng.uniform(lo, hi, size=(max(count * 4, 64), poly.dim))
        ok = (pts @ poly.normals.T <= poly.offsets + 1e-12).all(axis=1)
        out.extend(pts[ok])
        if len(out) >= count:
            break
    if len(out) < count:
        raise OfsmpcError("polytope rejection sampling starved")
    return np.asarray(out[:count])


def sample_zonotope(z: Zonotope, count: int, rng) -> np.ndarray:
    alpha = rng.uniform(-1.0, 1.0, size=(count, z.generators.shape[0]))
    return z.center + alpha @ z.generators


def coverage_fraction(sigma, z: Zonotope, count: int, rng) -> float:
    """Fraction of N(0, sigma) draws inside the zonotope, vectorized via
    the generator coordinates (valid for the square, full-rank confidence
    sets produced by the UBCS construction)."""
    factor = psd_sqrt(sigma)
    pts = rng.standard_normal((count, sigma.shape[0])) @ factor.T
    gen = z.generators
    if gen.shape[0] == gen.shape[1] and abs(np.linalg.det(gen)) > 1e-300:
        alpha = np.linalg.solve(gen.T, pts.T)
        return float((np.abs(alpha) <= 1.0).all(axis=0).mean())
    return float(np.fromiter((z.contains(p) for p in pts), dtype=bool).mean())


def run_checks(scenario: Scenario, sample_count: int = 200_000,
               probe_states: int = 100, probe_draws: int = 20,
               rpi_samples: int = 10_000, seed: int = 0) -> list:
    """Run the full battery; returns one CheckResult per property."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    results = []

    ctrl = build_controller(scenario)
    try:
        ctrl.fit(scenario.model)
    except (AssumptionError, OfsmpcError) as exc:
        results.append(CheckResult("synthesis", False, str(exc)))
        return results
    results.append(CheckResult("synthesis", True,
                               f"bound method {ctrl.bound_.method}"))

    schedule, p_inf = ctrl.schedule_, ctrl.p_inf_
    tol = scenario.tolerances.psd_tol

    if ctrl.assumptions_.assumption1:
        ok = all(psd_leq(schedule.prior_cov[k], p_inf, tol)
                 for k in range(schedule.horizon))
        results.append(CheckResult(
            "prior_bound_P_inf", ok,
            "P-_k <= P_inf for all k" if ok else "some P-_k exceeds P_inf"))

    for method, builder in (
            ("analytic_md", lambda: bound_analytic_md(
                scenario.model, p_inf, schedule)),
            ("scaled_reference", lambda: bound_scaled_reference(
                schedule, p_inf))):
        try:
            bound = builder()
        except AssumptionError as exc:
            results.append(CheckResult(f"bounds_{method}", False, str(exc)))
            continue
        ok_p = all(psd_leq(schedule.post_cov[k], bound.p_bar, tol)
                   for k in range(schedule.horizon))
        ok_phi = all(psd_leq(schedule.noise_cov[k], bound.phi_bar, tol)
                     for k in range(schedule.noise_cov.shape[0]))
        results.append(CheckResult(
            f"bounds_{method}", ok_p and ok_phi,
            f"P_k bound {'ok' if ok_p else 'VIOLATED'}, "
            f"Phi_k bound {'ok' if ok_phi else 'VIOLATED'}"))

    # Coverage: draws from the per-step covariances must land in the
    # uniform confidence sets at least as often as advertised, minus a
    # three-sigma sampling allowance.
    t = schedule.horizon
    for label, sets_and_cov, level in (
            ("coverage_error_set",
             (ctrl.error_set_,
              [schedule.post_cov[k] for k in (0, t // 2, t - 1)]),
             1.0 - scenario.p_x),
            ("coverage_noise_set",
             (ctrl.noise_set_,
              [schedule.noise_cov[k] for k in (0, (t - 1) // 2, t - 2)]),
             1.0 - scenario.p_f)):
        zono, covs = sets_and_cov
        p = 1.0 - level
        slack = 3.0 * np.sqrt(max(p * (1.0 - p), 1e-12) / sample_count)
        worst = 1.0
        for cov in covs:
            worst = min(worst, coverage_fraction(cov, zono, sample_count, rng))
        ok = worst >= level - slack
        results.append(CheckResult(
            label, ok, f"min coverage {worst:.6f} vs level {level:.6f} "
                       f"(slack {slack:.2e})"))

    offsets = np.array([s.offsets for s in ctrl.problem_.state_sets])
    mono = bool((np.diff(offsets, axis=0) <= 1e-12).all())
    results.append(CheckResult(
        "tube_monotonicity", mono,
        "tightened state offsets are non-increasing" if mono
        else "offsets increased along the horizon"))

    omega = ctrl.rpi_set_
    xs = sample_polytope(omega, rpi_samples, rng)
    ws = sample_zonotope(ctrl.noise_set_, rpi_samples, rng)
    nxt = xs @ ctrl.gains_.a_cl.T + ws
    ok = bool((nxt @ omega.normals.T <= omega.offsets + 1e-9).all())
    results.append(CheckResult(
        "rpi_certificate", ok,
        f"{rpi_samples} sampled transitions stayed inside" if ok
        else "a sampled transition escaped the RPI set"))

    # Shifted-candidate probe over random feasible states.
    feasible_states = []
    tries = 0
    while len(feasible_states) < probe_states and tries < probe_states * 200:
        tries += 1
        xhat = sample_polytope(ctrl.xhat_set_, 1, rng)[0]
        step = ctrl.control_step(xhat)
        if step.solution.status == OPTIMAL:
            feasible_states.append((xhat, step.solution))
    if len(feasible_states) < probe_states:
        results.append(CheckResult(
            "recursive_feasibility_probe", False,
            "could not sample enough feasible states"))
        return results
    failures = 0
    for _, solution in feasible_states:
        draws = sample_zonotope(ctrl.noise_set_, probe_draws, rng)
        for n_tilde in draws:
            if not feasibility_probe(ctrl.problem_, solution, n_tilde):
                failures += 1
    ok = failures == 0
    results.append(CheckResult(
        "recursive_feasibility_probe", ok,
        f"{probe_states * probe_draws} probes, {failures} failures"))
    return results
