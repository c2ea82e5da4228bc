"""
Command-line front end.

    python -m algorithms.orchestration validate SCENARIO
    python -m algorithms.orchestration run SCENARIO --out TRACE [--seed N] [--horizon N]
    python -m algorithms.orchestration metrics TRACE [--filter NAME]

Exit statuses: 0 success, 1 validation failure, 2 runtime error or
unreadable input, 3 invariant violation detected during the run.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from algorithms.orchestration.config import configure_logging
from algorithms.orchestration.errors import (
    OrchestrationError,
    ParseError,
    ScenarioValidationError,
    TraceError,
)
from algorithms.orchestration.metrics import compute_metrics
from algorithms.orchestration.scenario import load_scenario
from algorithms.orchestration.sim_engine import run
from algorithms.orchestration.trace_io import read_trace, write_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_INVARIANT = 3


def cmd_validate(scenario_path: str) -> int:
    """Print every validation problem; status 0 iff there are none."""
    try:
        load_scenario(scenario_path)
    except OSError as e:
        print(f"error: cannot read {scenario_path}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ParseError as e:
        print(f"{scenario_path}: ParseError: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioValidationError as e:
        for violation in e.violations:
            print(f"{scenario_path}: {violation}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_run(
    scenario_path: str,
    out_path: str,
    seed: Optional[int] = None,
    horizon: Optional[int] = None,
    quiet: bool = False,
    parallel: bool = False,
) -> int:
    """
    Run a scenario and write its trace.

    Returns:
        Exit status (3 when the engine recorded any invariant violation)
    """
    try:
        scenario = load_scenario(scenario_path, seed=seed, horizon=horizon)
    except OSError as e:
        print(f"error: cannot read {scenario_path}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ParseError, ScenarioValidationError) as e:
        problems = getattr(e, "violations", None) or [e]
        for problem in problems:
            print(f"{scenario_path}: {problem}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        trace = run(scenario, parallel=parallel)
        write_trace(trace, out_path)
    except (OrchestrationError, OSError) as e:
        logger.error("run failed: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("unexpected failure running %s", scenario_path)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    summary = compute_metrics(trace)
    cluster = summary.cluster
    if not quiet:
        rt_violations = sum(c.rt_violation_ticks for c in summary.containers.values())
        overload = sum(
            sum(n.overload_ticks.values()) for n in summary.nodes.values()
        )
        print("=" * 60)
        print(f"Trace written: {out_path} ({len(trace)} events)")
        print(f"  Seed / horizon:       {scenario.seed} / {scenario.horizon}")
        print(f"  Placements:           {cluster.placements}")
        print(f"  Rejects:              {cluster.rejects}")
        print(f"  Migrations:           {cluster.migrations}")
        print(f"  Redeploys / lost:     {cluster.redeploys} / {cluster.lost}")
        print(f"  RT violation ticks:   {rt_violations}")
        print(f"  Overload ticks:       {overload}")
        print(f"  Invariant violations: {cluster.invariant_violations}")
        print("=" * 60)
    status = EXIT_INVARIANT if cluster.invariant_violations else EXIT_OK
    return status


def cmd_metrics(trace_path: str, name_filter: Optional[str] = None) -> int:
    """Print the MetricsSummary of a trace as JSON."""
    try:
        summary = compute_metrics(read_trace(trace_path))
    except (OSError, TraceError) as e:
        print(f"error: {trace_path}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if name_filter is None:
        document = summary.to_document()
    else:
        try:
            document = summary.filtered(name_filter)
        except KeyError:
            print(
                f"error: no container or node named {name_filter!r} in {trace_path}",
                file=sys.stderr,
            )
            return EXIT_VALIDATION
    print(json.dumps(document, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m algorithms.orchestration",
        description="Shared-resource aware container orchestration simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a scenario document")
    p_validate.add_argument("scenario")

    p_run = sub.add_parser("run", help="run a scenario and write its trace")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="trace output path (.jsonl)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--horizon", type=int, default=None)
    p_run.add_argument("--quiet", action="store_true", help="no summary output")
    p_run.add_argument(
        "--parallel", action="store_true", help="run node phases on a thread pool"
    )

    p_metrics = sub.add_parser("metrics", help="summarize a trace")
    p_metrics.add_argument("trace")
    p_metrics.add_argument("--filter", default=None, help="container or node id")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    if args.command == "validate":
        return cmd_validate(args.scenario)
    if args.command == "run":
        return cmd_run(
            args.scenario,
            args.out,
            seed=args.seed,
            horizon=args.horizon,
            quiet=args.quiet,
            parallel=args.parallel,
        )
    return cmd_metrics(args.trace, args.filter)
