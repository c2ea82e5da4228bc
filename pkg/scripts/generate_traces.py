#!/usr/bin/env python3
"""
Batch Trace Generation

Runs every shipped scenario (and optionally the randomized overload corpus)
and writes one trace per run, followed by a one-line metrics summary each.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add parent directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from algorithms.orchestration.config import configure_logging  # noqa: E402
from algorithms.orchestration.corpus import overload_corpus  # noqa: E402
from algorithms.orchestration.errors import OrchestrationError  # noqa: E402
from algorithms.orchestration.metrics import compute_metrics  # noqa: E402
from algorithms.orchestration.scenario import load_scenario  # noqa: E402
from algorithms.orchestration.sim_engine import run  # noqa: E402
from algorithms.orchestration.trace_io import write_trace  # noqa: E402

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


def _summarize(name: str, trace, output_path: Path) -> Dict:
    cluster = compute_metrics(trace).cluster
    return {
        "name": name,
        "events": len(trace),
        "migrations": cluster.migrations,
        "rejects": cluster.rejects,
        "violations": cluster.invariant_violations,
        "path": str(output_path),
    }


def generate_all_traces(
    scenario_dir: Path = SCENARIO_DIR,
    output_dir: str = "traces",
    corpus_size: int = 0,
    parallel: bool = False,
) -> List[Dict]:
    """
    Generate trace files for all scenarios.

    Args:
        scenario_dir: Directory of scenario documents (*.json)
        output_dir: Directory to save trace files
        corpus_size: Number of generated overload scenarios to add
        parallel: Run node phases on a thread pool

    Returns:
        One summary row per successful run
    """
    jobs = [(p.stem, p) for p in sorted(Path(scenario_dir).glob("*.json"))]
    jobs += [
        (f"corpus-{doc['seed']}", doc) for doc in overload_corpus(count=corpus_size)
    ]

    print("=" * 70)
    print("BATCH TRACE GENERATION")
    print("=" * 70)
    print("\nConfiguration:")
    print(f"  Scenario directory: {scenario_dir}")
    print(f"  Generated scenarios: {corpus_size}")
    print(f"  Output directory: {output_dir}")
    print(f"\nTotal traces to generate: {len(jobs)}")
    print("\n" + "=" * 70)

    rows = []
    failed_count = 0
    for name, source in jobs:
        try:
            print(f"\n  Running {name}...", end=" ")
            scenario = load_scenario(source)
            trace = run(scenario, parallel=parallel)
            output_path = write_trace(trace, Path(output_dir) / f"{name}.jsonl")
            row = _summarize(name, trace, output_path)
            rows.append(row)
            mark = "✓" if row["violations"] == 0 else "❌"
            print(f"{mark} {row['events']} events, {row['migrations']} migrations")
        except (OrchestrationError, OSError) as e:
            print(f"❌ FAILED: {str(e)}")
            failed_count += 1
            continue

    print("\n" + "=" * 70)
    print("GENERATION COMPLETE")
    print("=" * 70)
    print(f"\n{'scenario':<28}{'events':>8}{'migr':>6}{'rej':>5}{'viol':>6}")
    print("-" * 53)
    for row in rows:
        print(
            f"{row['name']:<28}{row['events']:>8}{row['migrations']:>6}"
            f"{row['rejects']:>5}{row['violations']:>6}"
        )
    print(f"\n✓ Successfully generated: {len(rows)} traces")
    if failed_count > 0:
        print(f"❌ Failed: {failed_count} traces")
    print(f"\nTraces saved to: {output_dir}")
    return rows


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--scenarios", default=str(SCENARIO_DIR), help="scenario directory")
    parser.add_argument("--out", default="traces", help="output directory")
    parser.add_argument("--corpus", type=int, default=0, help="generated scenarios to add")
    parser.add_argument("--parallel", action="store_true")
    args = parser.parse_args(argv)

    configure_logging()
    rows = generate_all_traces(
        scenario_dir=Path(args.scenarios),
        output_dir=args.out,
        corpus_size=args.corpus,
        parallel=args.parallel,
    )
    return 0 if all(r["violations"] == 0 for r in rows) else 3


if __name__ == "__main__":
    sys.exit(main())
