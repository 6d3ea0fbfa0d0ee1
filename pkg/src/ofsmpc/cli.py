"""Command-line pipeline: synth, simulate, montecarlo, verify.

Exit codes: 0 success, 2 configuration or validation error, 3 infeasible
synthesis (an empty set, or a bound whose assumptions fail), 4 property
check failure, 5 solver iteration-limit anomaly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .exceptions import (AssumptionError, EmptySetError, OfsmpcError,
                         ValidationError)
from .scenario import (Scenario, build_baseline, build_controller,
                       emit_scenario, load_scenario)
from .sets import format_hpolytope, format_matrix, format_zonotope
from .simulate import (RngStream, format_report, monte_carlo,
                       report_csv_header, report_csv_row, simulate_run,
                       trace_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_PROPERTY = 4
EXIT_SOLVER_LIMIT = 5


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofsmpc",
        description="Output-feedback stochastic MPC synthesis and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, brief in (
            ("synth", "synthesize bounds, confidence sets, and tightened sets"),
            ("simulate", "run one closed-loop simulation"),
            ("montecarlo", "run a Monte-Carlo campaign"),
            ("verify", "run the property-check battery")):
        cmd = sub.add_parser(name, help=brief)
        cmd.add_argument("--config", required=True, help="scenario YAML path")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="seed override (simulate: run stream; "
                              "montecarlo: base seed)")
        cmd.add_argument("--runs", type=int, default=None,
                         help="montecarlo run-count override")
        cmd.add_argument("--workers", type=int, default=None,
                         help="montecarlo worker-count override")
        cmd.add_argument("--controller", choices=("proposed", "baseline"),
                         default="proposed")
    return parser


def _fit_controller(scenario: Scenario, which: str):
    if which == "baseline":
        return build_baseline(scenario).fit(scenario.model)
    return build_controller(scenario).fit(scenario.model)


def cmd_synth(scenario: Scenario, out_dir: Path) -> int:
    ctrl = build_controller(scenario).fit(scenario.model)
    blocks = [
        ("matrix P_inf", format_matrix(ctrl.p_inf_)),
        ("matrix P_bar", format_matrix(ctrl.bound_.p_bar)),
        ("matrix Phi_bar", format_matrix(ctrl.bound_.phi_bar)),
        ("zonotope E_err", format_zonotope(ctrl.error_set_)),
        ("zonotope E_noise", format_zonotope(ctrl.noise_set_)),
        ("hpoly X_hat", format_hpolytope(ctrl.xhat_set_)),
    ]
    for i, s in enumerate(ctrl.problem_.state_sets):
        blocks.append((f"hpoly X_rf_{i}", format_hpolytope(s)))
    for i, s in enumerate(ctrl.problem_.input_sets):
        blocks.append((f"hpoly U_rf_{i}", format_hpolytope(s)))
    blocks.append(("hpoly X_f_hat", format_hpolytope(ctrl.rpi_set_)))
    blocks.append(("hpoly X_f_rf", format_hpolytope(ctrl.terminal_)))
    text = "\n\n".join(f"# {name}\n{body}" for name, body in blocks) + "\n"
    path = out_dir / "synthesis.txt"
    path.write_text(text, encoding="utf-8")
    print(f"synthesis written to {path}")
    print(f"bound method: {ctrl.bound_.method}")
    return EXIT_OK


def cmd_simulate(scenario: Scenario, out_dir: Path, seed, which: str) -> int:
    ctrl = _fit_controller(scenario, which)
    seed = scenario.base_seed if seed is None else seed
    trace = simulate_run(scenario.model, ctrl.schedule_, ctrl,
                         RngStream(seed, 0))
    path = out_dir / f"trace_{which}_seed{seed}.csv"
    path.write_text(trace_csv(trace, scenario.model), encoding="utf-8")
    if trace.status == "success":
        print(f"success: {trace.n_steps} steps, "
              f"{trace.n_violations} state violations")
    else:
        print(f"{trace.status} at step {trace.fail_step}, "
              f"{trace.n_violations} state violations")
    print(f"trace written to {path}")
    return EXIT_OK if trace.status != "iteration_limit" else EXIT_SOLVER_LIMIT


def cmd_montecarlo(scenario: Scenario, out_dir: Path, seed, runs, workers,
                   which: str) -> int:
    ctrl = _fit_controller(scenario, which)
    base_seed = scenario.base_seed if seed is None else seed
    n_runs = scenario.n_runs if runs is None else runs
    n_workers = scenario.workers if workers is None else workers
    report = monte_carlo(scenario.model, ctrl.schedule_, ctrl, n_runs,
                         base_seed, worker_count=n_workers,
                         p_fail=scenario.p_f)
    header = f"montecarlo controller={which} runs={n_runs} seed={base_seed}"
    text = format_report(report, header=header)
    (out_dir / f"mc_{which}.txt").write_text(text, encoding="utf-8")
    csv = report_csv_header() + report_csv_row(report, which)
    (out_dir / f"mc_{which}.csv").write_text(csv, encoding="utf-8")
    print(text, end="")
    if report.runs_iteration_limit > 0:
        print(f"WARNING: {report.runs_iteration_limit} runs hit the solver "
              f"iteration limit", file=sys.stderr)
        return EXIT_SOLVER_LIMIT
    return EXIT_OK


def cmd_verify(scenario: Scenario) -> int:
    from .verify import run_checks
    results = run_checks(scenario)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if not failed else EXIT_PROPERTY


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
    except (ValidationError, OSError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "synth":
            return cmd_synth(scenario, out_dir)
        if args.command == "simulate":
            return cmd_simulate(scenario, out_dir, args.seed, args.controller)
        if args.command == "montecarlo":
            return cmd_montecarlo(scenario, out_dir, args.seed, args.runs,
                                  args.workers, args.controller)
        return cmd_verify(scenario)
    except (EmptySetError, AssumptionError) as exc:
        stage = getattr(exc, "stage", None)
        where = f" [{stage}]" if stage else ""
        print(f"infeasible synthesis{where}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
