"""
Run Metrics

Everything here is recomputed from trace events alone; the scenario header
(first event) supplies ladder capacities and initial claims.
"""

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from algorithms.orchestration.errors import TraceError
from algorithms.orchestration.sim_engine import Event, Trace


@dataclass
class ContainerMetrics:
    rt_violation_ticks: int = 0
    granted_ratio: Optional[float] = None
    qos_histogram: Dict[str, int] = field(default_factory=dict)
    migrations: int = 0
    delivered: Dict[str, float] = field(default_factory=dict)


@dataclass
class NodeMetrics:
    utilization: Dict[str, float] = field(default_factory=dict)
    overload_ticks: Dict[str, int] = field(default_factory=dict)


@dataclass
class ClusterMetrics:
    placements: int = 0
    redeploys: int = 0
    rejects: int = 0
    lost: int = 0
    migrations: int = 0
    request_changes_granted: int = 0
    request_changes_denied: int = 0
    invariant_violations: int = 0
    delivered: Dict[str, float] = field(default_factory=dict)


@dataclass
class MetricsSummary:
    containers: Dict[str, ContainerMetrics] = field(default_factory=dict)
    nodes: Dict[str, NodeMetrics] = field(default_factory=dict)
    cluster: ClusterMetrics = field(default_factory=ClusterMetrics)

    def to_document(self) -> Dict[str, Any]:
        return {
            "containers": {k: asdict(v) for k, v in sorted(self.containers.items())},
            "nodes": {k: asdict(v) for k, v in sorted(self.nodes.items())},
            "cluster": asdict(self.cluster),
        }

    def filtered(self, name: str) -> Dict[str, Any]:
        """
        Restrict the document to one container or node.

        Raises:
            KeyError: ``name`` is neither a container nor a node of the run
        """
        if name in self.containers:
            return {"containers": {name: asdict(self.containers[name])}}
        if name in self.nodes:
            return {"nodes": {name: asdict(self.nodes[name])}}
        raise KeyError(name)


_COUNTED = {
    "Place": "placements",
    "Redeploy": "redeploys",
    "Reject": "rejects",
    "Lost": "lost",
    "Migrate": "migrations",
    "GrantRequestChange": "request_changes_granted",
    "DenyRequestChange": "request_changes_denied",
    "InvariantViolation": "invariant_violations",
}


def _strict_requests(claims: Iterable[Dict[str, Any]]) -> Dict[str, int]:
    return {
        c["resource"]: int(c["request"])
        for c in claims
        if c["strictness"] == "Strict"
    }


def _requests(claims: Iterable[Dict[str, Any]]) -> Dict[str, int]:
    return {c["resource"]: int(c["request"]) for c in claims if int(c["request"]) > 0}


def compute_metrics(trace: Any) -> MetricsSummary:
    """
    Summarize a run from its trace.

    Args:
        trace: Trace or sequence of Events, header first

    Returns:
        MetricsSummary (all zero for an empty trace)

    Raises:
        TraceError: events out of tick order, missing header or malformed
            payloads
    """
    events: List[Event] = list(trace.events if isinstance(trace, Trace) else trace)
    summary = MetricsSummary()
    if not events:
        return summary
    if events[0].kind != "scenario":
        raise TraceError("trace does not start with a scenario header")
    try:
        return _compute(events, summary)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise TraceError(f"malformed trace: {e!r}")


def _compute(events: List[Event], summary: MetricsSummary) -> MetricsSummary:
    header = events[0].payload
    capacities = {
        node: {r: float(lad["capacity"]) for r, lad in ladders.items()}
        for node, ladders in header["nodes"].items()
    }
    claims: Dict[str, List[Dict[str, Any]]] = {}
    for cid, info in header["containers"].items():
        claims[cid] = list(info["claims"])
        for k in range(1, int(info["replicas"])):
            claims[f"{cid}#{k}"] = list(info["claims"])

    for node in capacities:
        summary.nodes[node] = NodeMetrics(
            utilization={r: 0.0 for r in capacities[node]},
            overload_ticks={r: 0 for r in capacities[node]},
        )

    def container(cid: str) -> ContainerMetrics:
        return summary.containers.setdefault(cid, ContainerMetrics())

    usage: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    ratios: Dict[str, List[float]] = defaultdict(list)
    violated: set = set()
    cluster = summary.cluster
    last_tick = 0

    for event in events[1:]:
        if event.tick < last_tick:
            raise TraceError(f"tick {event.tick} after tick {last_tick}")
        last_tick = event.tick
        kind, payload = event.kind, event.payload

        if kind in _COUNTED:
            name = _COUNTED[kind]
            setattr(cluster, name, getattr(cluster, name) + 1)
        if kind in ("Place", "Redeploy"):
            container(payload["container"])
        elif kind == "Migrate":
            container(payload["container"]).migrations += 1
        elif kind == "GrantRequestChange":
            claims[payload["container"]] = list(payload["claims"])
        elif kind == "InvariantViolation" and "container" in payload:
            violated.add((payload["container"], event.tick))
        elif kind == "samples":
            totals: Dict[str, float] = defaultdict(float)
            for cid, per_resource in payload.items():
                metrics = container(cid)
                for r, v in per_resource.items():
                    metrics.delivered[r] = metrics.delivered.get(r, 0.0) + float(v)
                    cluster.delivered[r] = cluster.delivered.get(r, 0.0) + float(v)
                    totals[r] += float(v)
            for r, total in totals.items():
                usage[(event.source, r)].append(total / capacities[event.source][r])
        elif kind == "grants":
            for cid, granted in payload.items():
                strict = _strict_requests(claims.get(cid, []))
                if any(granted.get(r, 0) < req for r, req in strict.items()):
                    violated.add((cid, event.tick))
                for r, req in _requests(claims.get(cid, [])).items():
                    ratios[cid].append(granted.get(r, 0) / req)
        elif kind == "report":
            node = summary.nodes[payload["node"]]
            for r, status in payload["resources"].items():
                if status["overloaded"]:
                    node.overload_ticks[r] = node.overload_ticks.get(r, 0) + 1
            for cid, status in payload["containers"].items():
                hist = container(cid).qos_histogram
                level = str(status["qos"])
                hist[level] = hist.get(level, 0) + 1

    for cid, tick in violated:
        container(cid).rt_violation_ticks += 1
    for cid, values in ratios.items():
        container(cid).granted_ratio = float(np.mean(values))
    for (node, r), values in usage.items():
        summary.nodes[node].utilization[r] = float(np.mean(values))
    return summary
