"""Command-line driver.

Exit codes: 0 solved/converged, 2 iteration limit, 3 infeasible,
4 usage or structure errors.  When ``--output`` is given a JSON run report
is written no matter how the run ends.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from typing import Optional

from .benders import BendersConfig, BendersResult, run_decomposition
from .errors import (
    GraphOptError,
    LevelSetInfeasibleError,
    RelaxationInfeasibleError,
    SubproblemInfeasibleError,
    UsageError,
)
from .fixtures import FIXTURE_NAMES, generate_fixture
from .model import Graph
from .sequential import relaxed_parallel_bound, sequential_solve
from .serialize import RunReport, load_instance, parse_membership, solution_by_name, write_report
from .solvers import solve_lp, solve_milp
from .standard_form import check_solution, flatten
from .transform import apply_partition

EXIT_OK = 0
EXIT_ITER_LIMIT = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphopt", description="Hierarchical graph optimization driver")
    source = parser.add_argument_group("model source")
    source.add_argument("--instance", help="path to an instance JSON file")
    source.add_argument("--fixture", choices=FIXTURE_NAMES, help="built-in example model")
    parser.add_argument(
        "--mode",
        choices=("monolithic", "benders", "sequential", "bound"),
        default="monolithic",
    )
    parser.add_argument("--root", help="root subgraph id for benders mode")
    parser.add_argument("--partition", help="membership file: 'node_id block' per line")
    parser.add_argument("--max-iters", type=int, default=100)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--multicut", action="store_true")
    parser.add_argument("--strengthened", action="store_true")
    parser.add_argument("--lagrangian", action="store_true")
    parser.add_argument("--regularize", action="store_true")
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--slacks", action="store_true")
    parser.add_argument("--slack-penalty", type=float, default=1e6)
    parser.add_argument("--parallel", action="store_true")
    parser.add_argument("--warm-start-cuts", action="store_true")
    parser.add_argument("--order", help="comma-separated subgraph ids for sequential mode")
    parser.add_argument("--output", help="write a JSON run report here")
    return parser


def _load_graph(args: argparse.Namespace) -> Graph:
    if bool(args.instance) == bool(args.fixture):
        raise UsageError("give exactly one of --instance or --fixture")
    graph = load_instance(args.instance) if args.instance else generate_fixture(args.fixture)
    if args.partition:
        apply_partition(graph, parse_membership(args.partition))
    return graph


def _config_echo(args: argparse.Namespace) -> dict:
    return {
        "mode": args.mode,
        "root": args.root,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "multicut": args.multicut,
        "strengthened": args.strengthened,
        "lagrangian": args.lagrangian,
        "regularize": args.regularize,
        "alpha": args.alpha,
        "slacks": args.slacks,
        "slack_penalty": args.slack_penalty,
        "parallel": args.parallel,
        "warm_start_cuts": args.warm_start_cuts,
        "order": args.order,
    }


def _run_monolithic(graph: Graph, args: argparse.Namespace, report: RunReport) -> int:
    problem = flatten(graph)
    result = solve_milp(problem) if problem.integer_columns() else solve_lp(problem)
    report.status = result.status
    if result.status != "optimal":
        return EXIT_INFEASIBLE
    report.objective = result.objective
    solution = problem.values_by_ref(result.primal)
    report.solution = solution_by_name(solution)
    report.max_violation = check_solution(graph, solution)
    return EXIT_OK


def _run_benders(graph: Graph, args: argparse.Namespace, report: RunReport) -> int:
    config = BendersConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        multicut=args.multicut,
        strengthened=args.strengthened,
        lagrangian=args.lagrangian,
        regularize=args.regularize,
        alpha=args.alpha,
        add_slacks=args.slacks,
        slack_penalty=args.slack_penalty,
        parallelize_second_stage=args.parallel,
        warm_start_cuts=args.warm_start_cuts,
    )
    result = run_decomposition(graph, root=args.root, config=config)
    report.status = result.status
    report.objective = result.objective
    report.solution = solution_by_name(result.solution)
    report.max_violation = result.max_violation
    report.flags = dict(result.flags)
    report.bounds_per_iteration = [
        {
            "iteration": rec.iteration,
            "lower": rec.lower_bound,
            "upper": rec.upper_bound,
            "gap": rec.gap,
            "cuts_added": rec.cuts_added,
            "regularized": rec.regularized,
        }
        for rec in result.trace
    ]
    return EXIT_OK if result.converged else EXIT_ITER_LIMIT


def _run_sequential(graph: Graph, args: argparse.Namespace, report: RunReport) -> int:
    order = args.order.split(",") if args.order else None
    result = sequential_solve(
        graph, order, add_slacks=args.slacks, slack_penalty=args.slack_penalty
    )
    report.status = result.status
    report.objective = result.objective
    report.solution = solution_by_name(result.solution)
    report.max_violation = result.max_violation
    report.bounds_per_iteration = [
        {"stage": gid, "cost": cost} for gid, cost in result.stage_costs
    ]
    return EXIT_OK


def _run_bound(graph: Graph, args: argparse.Namespace, report: RunReport) -> int:
    result = relaxed_parallel_bound(graph)
    report.status = result.status
    report.objective = result.objective
    report.solution = solution_by_name(result.solution)
    report.max_violation = result.max_violation
    report.bounds_per_iteration = [
        {"stage": gid, "cost": cost} for gid, cost in result.stage_costs
    ]
    return EXIT_OK


def _print_summary(report: RunReport) -> None:
    line = f"mode: {report.mode}  status: {report.status}"
    if math.isfinite(report.objective):
        line += f"  objective: {report.objective:.10g}"
    print(line)
    per_iter = report.bounds_per_iteration
    if per_iter and "lower" in per_iter[-1]:
        last = per_iter[-1]
        print(
            f"iterations: {len(per_iter)}  lower: {last['lower']:.10g}"
            f"  upper: {last['upper']:.10g}  gap: {last['gap']:.3g}"
        )
    if math.isfinite(report.max_violation) and report.solution:
        print(f"max violation: {report.max_violation:.3g}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = RunReport(
        mode="", status="error", objective=float("nan"), wall_clock=0.0
    )
    started = time.perf_counter()
    code = EXIT_USAGE
    try:
        report.mode = args.mode
        report.config = _config_echo(args)
        graph = _load_graph(args)
        runner = {
            "monolithic": _run_monolithic,
            "benders": _run_benders,
            "sequential": _run_sequential,
            "bound": _run_bound,
        }[args.mode]
        code = runner(graph, args, report)
    except (SubproblemInfeasibleError, LevelSetInfeasibleError, RelaxationInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        report.status = "infeasible"
        code = EXIT_INFEASIBLE
    except GraphOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report.status = "error"
        code = EXIT_USAGE
    finally:
        report.wall_clock = time.perf_counter() - started
        if getattr(args, "output", None):
            write_report(report, args.output)
    _print_summary(report)
    return code


if __name__ == "__main__":
    sys.exit(main())
