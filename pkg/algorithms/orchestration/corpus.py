"""
Randomized overload scenarios.

Each document places one to three nodes under best-effort containers whose
memory-bandwidth demand steps well past node capacity, next to strict
real-time residents. Used by the acceptance tests and the batch script.
"""

from typing import Any, Dict, List

from algorithms.orchestration import rng

BANDWIDTH = "MemoryBandwidth"


def overload_document(seed: int, horizon: int = 160) -> Dict[str, Any]:
    """
    Build one randomized overload scenario document.

    Args:
        seed: Corpus seed; also the scenario seed
        horizon: Ticks to simulate

    Returns:
        Scenario document (schema 1)
    """
    gen = rng.for_path(seed, "corpus")
    node_count = int(gen.integers(1, 4))
    nodes = [
        {
            "id": f"n{i}",
            "staticPriority": float(node_count - i),
            "ladders": {BANDWIDTH: {"capacity": 1000, "levels": 10}},
        }
        for i in range(1, node_count + 1)
    ]

    containers: List[Dict[str, Any]] = []
    for i in range(int(gen.integers(1, 4))):
        containers.append(
            {
                "id": f"rt{i}",
                "claims": {BANDWIDTH: {"request": 3, "limit": 3}},
                "annotations": {BANDWIDTH: "strict"},
                "criticality": 5,
                "arrival": 0,
                "demand": {"kind": "Constant", "values": {BANDWIDTH: 250}},
            }
        )
    be_count = 2 * node_count + int(gen.integers(1, 4))
    for i in range(be_count):
        adaptive = bool(gen.integers(0, 2))
        containers.append(
            {
                "id": f"be{i}",
                "claims": {
                    BANDWIDTH: {"request": 1, "limit": int(gen.integers(5, 7))}
                },
                "adaptive": adaptive,
                "qosLevels": [1.0, 0.7, 0.4] if adaptive else [1.0],
                "complies": bool(gen.random() < 0.8),
                "migratable": True,
                "criticality": 0,
                "arrival": int(gen.integers(0, 5)),
                "tasks": int(gen.integers(1, 3)),
                "demand": {
                    "kind": "Step",
                    "at": int(gen.integers(20, 40)),
                    "before": {BANDWIDTH: 150},
                    "after": {BANDWIDTH: 450},
                },
            }
        )
    return {
        "schema": 1,
        "seed": seed,
        "horizon": horizon,
        "nodes": nodes,
        "containers": containers,
    }


def overload_corpus(count: int = 20, base_seed: int = 1000) -> List[Dict[str, Any]]:
    return [overload_document(base_seed + k) for k in range(count)]
