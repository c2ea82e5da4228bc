"""
Deterministic Simulation Engine

Advances a scenario tick by tick. Each tick runs a fixed phase order:

    tick marker
    per node (node id order): samples -> bands -> overload changes ->
        enforcement actions -> QoS answers -> grants -> invariant checks ->
        status report
    global manager actions (applied to the nodes immediately)
    scenario events (they take effect from the next tick)

Reports and failure notices reach the global manager ``report_latency``
ticks after they are produced. Per-node phases may run on a thread pool;
results are merged in node order, so the trace does not depend on it.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from algorithms.orchestration.core_model import (
    EPSILON,
    RESOURCE_ORDER,
    ContainerSpec,
    ResourceClaim,
    ResourceKind,
    claim_payload,
)
from algorithms.orchestration.demand import DemandModel
from algorithms.orchestration.global_manager import (
    ActionKind as GlobalKind,
    ClusterView,
    GlobalAction,
    GlobalResourceManager,
)
from algorithms.orchestration.monitor import UsageSample
from algorithms.orchestration.node_manager import (
    ActionKind as LocalKind,
    LocalResourceManager,
    NodeStatusReport,
    qos_negotiate,
)
from algorithms.orchestration.scenario import ContainerEntry, EventKind, Scenario

logger = logging.getLogger(__name__)

SIM = "sim"
GRM = "grm"


@dataclass(frozen=True)
class Event:
    tick: int
    source: str
    kind: str
    payload: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Trace:
    events: List[Event] = field(default_factory=list)

    def of_kind(self, *kinds: str) -> List[Event]:
        return [e for e in self.events if e.kind in kinds]

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class ContainerRuntime:
    """Simulated behavior of one container instance (replica)."""

    container_id: str
    entry: ContainerEntry
    demand: DemandModel
    node_id: Optional[str] = None


@dataclass
class World:
    scenario: Scenario
    lrms: Dict[str, LocalResourceManager]
    grm: GlobalResourceManager
    containers: Dict[str, ContainerRuntime] = field(default_factory=dict)
    stopped_nodes: Set[str] = field(default_factory=set)
    report_queue: List[Tuple[int, NodeStatusReport]] = field(default_factory=list)
    failure_queue: List[Tuple[int, str]] = field(default_factory=list)
    change_queue: List[Tuple[int, str, Tuple[ResourceClaim, ...]]] = field(
        default_factory=list
    )
    demand_queue: List[Tuple[int, str, DemandModel]] = field(default_factory=list)
    demand_overrides: Dict[str, DemandModel] = field(default_factory=dict)
    tick: int = 0
    violations: int = 0
    parallel: bool = False

    @property
    def view(self) -> ClusterView:
        return self.grm.view


def build_world(scenario: Scenario, parallel: bool = False) -> World:
    defaults = scenario.defaults
    view = ClusterView(defaults=defaults, criticality_ceiling=scenario.criticality_ceiling)
    lrms = {}
    for node in sorted(scenario.nodes, key=lambda n: n.id):
        view.add_node(node, tick=0)
        lrms[node.id] = LocalResourceManager(node, defaults)
    return World(
        scenario=scenario,
        lrms=lrms,
        grm=GlobalResourceManager(view),
        parallel=parallel,
    )


def header_event(scenario: Scenario) -> Event:
    """Tick-0 record carrying what metrics need besides the events."""
    return Event(
        0,
        SIM,
        "scenario",
        {
            "seed": scenario.seed,
            "horizon": scenario.horizon,
            "defaults": scenario.defaults.to_document(),
            "criticality_ceiling": scenario.criticality_ceiling,
            "nodes": {
                n.id: {
                    lad.resource.value: {"capacity": lad.capacity, "levels": lad.levels}
                    for lad in n.ladders
                }
                for n in scenario.nodes
            },
            "containers": {
                e.spec.id: {
                    "arrival": e.arrival,
                    "replicas": e.spec.replicas,
                    "claims": [claim_payload(c) for c in e.spec.claims],
                }
                for e in scenario.containers
            },
        },
    )


def _deliver(
    capacity: float,
    demands: Sequence[float],
    reservations: Sequence[float],
) -> Tuple[np.ndarray, bool]:
    """
    Split one node resource between residents.

    Reserved amounts are served first (scaled down only when they exceed
    capacity, which is reported as an overflow); the rest of the capacity is
    shared in proportion to residual demand.
    """
    demand = np.asarray(demands, dtype=np.float64)
    reserved = np.minimum(demand, np.asarray(reservations, dtype=np.float64))
    overflow = bool(reserved.sum() > capacity + EPSILON)
    if overflow:
        reserved = reserved * (capacity / reserved.sum())
    residual = demand - reserved
    room = max(0.0, capacity - float(reserved.sum()))
    wanted = float(residual.sum())
    if wanted <= room or wanted == 0.0:
        return reserved + residual, overflow
    return reserved + residual * (room / wanted), overflow


def _node_phase(world: World, node_id: str, tick: int) -> Tuple[List[Event], NodeStatusReport]:
    lrm = world.lrms[node_id]
    state = lrm.state
    events: List[Event] = []
    residents = sorted(state.residents)

    effective: Dict[str, Dict[ResourceKind, float]] = {}
    for cid in residents:
        runtime = world.containers[cid]
        scale = state.residents[cid].qos_scale
        wanted = {}
        for resource, amount in runtime.demand.value(tick).items():
            value = amount * scale
            cap = lrm.demand_cap(cid, resource)
            if cap is not None:
                value = min(value, cap)
            wanted[resource] = value
        effective[cid] = wanted

    checks: List[Event] = []
    delivered: Dict[str, Dict[ResourceKind, float]] = {cid: {} for cid in residents}
    for resource in RESOURCE_ORDER:
        users = [cid for cid in residents if resource in effective[cid]]
        if not users:
            continue
        ladder = lrm.node.ladder(resource)
        reservations = [
            state.residents[c].spec.strict_request(resource) * ladder.level_width
            for c in users
        ]
        amounts, overflow = _deliver(
            ladder.capacity, [effective[c][resource] for c in users], reservations
        )
        if overflow:
            checks.append(
                Event(tick, node_id, "InvariantViolation",
                      {"check": "reservation-overflow", "resource": resource.value})
            )
        for cid, reserve, amount in zip(users, reservations, amounts):
            delivered[cid][resource] = float(amount)
            floor = min(effective[cid][resource], reserve)
            if amount < floor - EPSILON:
                checks.append(
                    Event(tick, node_id, "InvariantViolation",
                          {"check": "isolation", "container": cid,
                           "resource": resource.value})
                )

    samples = []
    for cid in residents:
        tasks = world.containers[cid].entry.tasks
        for resource, amount in delivered[cid].items():
            for k in range(tasks):
                samples.append(UsageSample(tick, cid, f"{cid}/{k}", resource, amount / tasks))
    if residents:
        events.append(
            Event(tick, node_id, "samples",
                  {cid: {r.value: v for r, v in delivered[cid].items()} for cid in residents})
        )

    lrm.ingest_tick(samples, tick)
    if state.tt_activated_tick == tick and state.tt_active is not None:
        events.append(Event(tick, node_id, "TtTableActivated", state.tt_active.to_payload()))
    if residents:
        events.append(
            Event(tick, node_id, "bands", {
                "containers": {
                    cid: {r.value: state.band(cid, r) for r in state.residents[cid].spec.resources}
                    for cid in residents
                },
                "node": {r.value: state.node_bands[r].current_band for r in RESOURCE_ORDER},
            })
        )

    for change in lrm.detect_overload(tick):
        kind = "OverloadLatched" if change.latched else "OverloadCleared"
        payload: Dict[str, Any] = {"resource": change.resource.value}
        if not change.latched:
            payload["restored"] = list(change.restored)
        events.append(Event(tick, node_id, kind, payload))

    answers = []
    for action in lrm.enforce(tick):
        events.append(
            Event(tick, node_id, action.kind.value, {
                "container": action.container_id,
                "resource": action.resource.value,
                "detail": action.detail,
            })
        )
        if action.kind is LocalKind.QOS_REDUCE_REQUEST:
            answers.append(_answer_qos(world, lrm, action.container_id, action.detail, tick))
    events.extend(a for a in answers if a is not None)

    events.extend(_check_grants(lrm, tick))
    events.extend(checks)
    report = lrm.build_status_report(tick)
    if residents:
        events.append(Event(tick, node_id, "report", report.to_payload()))
    return events, report


def _answer_qos(
    world: World, lrm: LocalResourceManager, cid: str, fraction: float, tick: int
) -> Optional[Event]:
    resident = lrm.state.residents[cid]
    if not world.containers[cid].entry.complies:
        lrm.mark_refused(cid)
        return Event(tick, lrm.node.id, "QosRefused", {"container": cid, "reason": "non-complying"})
    level = qos_negotiate(resident.spec, resident.qos_index, fraction)
    if level is None:
        lrm.mark_refused(cid)
        return Event(tick, lrm.node.id, "QosRefused", {"container": cid, "reason": "no-level"})
    lrm.set_qos_level(cid, level)
    return Event(
        tick, lrm.node.id, "QosAccepted",
        {"container": cid, "level": level, "scale": resident.spec.qos_levels[level]},
    )


def _check_grants(lrm: LocalResourceManager, tick: int) -> List[Event]:
    state = lrm.state
    events = []
    grants = {}
    for cid in sorted(state.residents):
        resident = state.residents[cid]
        grants[cid] = {r.value: lvl for r, lvl in resident.granted.items()}
        for claim in resident.spec.claims:
            if claim.is_strict and resident.granted.get(claim.resource, 0) < claim.request_levels:
                events.append(
                    Event(tick, lrm.node.id, "InvariantViolation",
                          {"check": "isolation", "container": cid,
                           "resource": claim.resource.value})
                )
    if grants:
        events.insert(0, Event(tick, lrm.node.id, "grants", grants))
    for resource in RESOURCE_ORDER:
        if state.strict_reserved(resource) > lrm.node.levels(resource):
            events.append(
                Event(tick, lrm.node.id, "InvariantViolation",
                      {"check": "conservation", "resource": resource.value})
            )
    return events


def _due(queue: List, tick: int) -> List:
    ready = [item for item in queue if item[0] <= tick]
    queue[:] = [item for item in queue if item[0] > tick]
    return ready


def _runtime_for(world: World, spec: ContainerSpec) -> ContainerRuntime:
    runtime = world.containers.get(spec.id)
    if runtime is None:
        entry = world.scenario.container(spec.id.split("#", 1)[0])
        demand = world.demand_overrides.get(entry.spec.id, entry.demand)
        runtime = ContainerRuntime(spec.id, entry, demand)
        world.containers[spec.id] = runtime
    return runtime


def _leave(world: World, cid: str) -> None:
    runtime = world.containers.get(cid)
    if runtime is None or runtime.node_id is None:
        return
    lrm = world.lrms[runtime.node_id]
    if cid in lrm.state.residents:
        lrm.evict(cid)
    runtime.node_id = None


def apply_action(world: World, action: GlobalAction, tick: int) -> List[Event]:
    """Carry one global decision out on the node managers; returns follow-up events."""
    view = world.view
    kind = action.kind
    cid = action.container_id
    if kind in (GlobalKind.PLACE, GlobalKind.REDEPLOY, GlobalKind.MIGRATE):
        spec = view.registry[cid].spec
        runtime = _runtime_for(world, spec)
        _leave(world, cid)
        assert action.to_node is not None
        world.lrms[action.to_node].admit(spec, tick)
        runtime.node_id = action.to_node
    elif kind in (GlobalKind.LOST, GlobalKind.REJECT):
        if cid in world.containers:
            _leave(world, cid)
    elif kind is GlobalKind.GRANT_REQUEST_CHANGE:
        world.lrms[world.containers[cid].node_id or ""].update_claims(view.registry[cid].spec)
    elif kind is GlobalKind.CONFIRM_THROTTLE:
        runtime = world.containers.get(cid)
        if runtime is not None and runtime.node_id == action.from_node:
            world.lrms[runtime.node_id].confirm_cap(cid)
    elif kind is GlobalKind.INSTALL_TT_TABLE:
        assert action.to_node is not None and action.table is not None
        state = world.lrms[action.to_node].install_tt_table(action.table, tick)
        if state.tt_activated_tick == tick and state.tt_active is action.table:
            return [Event(tick, action.to_node, "TtTableActivated", action.table.to_payload())]
    return []


def _scenario_events(world: World, tick: int) -> List[Event]:
    latency = world.scenario.defaults.report_latency
    events = []
    for ev in world.scenario.events:
        if ev.tick != tick:
            continue
        if ev.kind is EventKind.NODE_FAIL:
            assert ev.node_id is not None
            world.stopped_nodes.add(ev.node_id)
            world.failure_queue.append((tick + latency, ev.node_id))
            events.append(Event(tick, SIM, ev.kind.value, {"node": ev.node_id}))
            for cid in world.lrms[ev.node_id].mark_failed(tick):
                events.append(
                    Event(tick, SIM, "HealthChanged",
                          {"container": cid, "node": ev.node_id, "status": "Failed"})
                )
        elif ev.kind is EventKind.REQUEST_CHANGE:
            assert ev.container_id is not None and ev.claims is not None
            world.change_queue.append((tick + 1, ev.container_id, ev.claims))
            events.append(
                Event(tick, SIM, ev.kind.value,
                      {"container": ev.container_id,
                       "claims": [claim_payload(c) for c in ev.claims]})
            )
        else:
            assert ev.container_id is not None and ev.demand is not None
            world.demand_queue.append((tick + 1, ev.container_id, ev.demand))
            events.append(Event(tick, SIM, ev.kind.value, {"container": ev.container_id}))
    return events


def step(world: World) -> List[Event]:
    """
    Advance the world by one tick.

    Returns:
        Events emitted during the tick, in canonical order
    """
    tick = world.tick
    events = [Event(tick, SIM, "tick", {})]

    for _, base, model in _due(world.demand_queue, tick):
        world.demand_overrides[base] = model
        for cid, runtime in world.containers.items():
            if cid.split("#", 1)[0] == base:
                runtime.demand = model

    nodes = [n for n in sorted(world.lrms) if n not in world.stopped_nodes]
    if world.parallel and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=len(nodes)) as pool:
            results = list(pool.map(lambda n: _node_phase(world, n, tick), nodes))
    else:
        results = [_node_phase(world, n, tick) for n in nodes]
    latency = world.scenario.defaults.report_latency
    for node_events, report in results:
        events.extend(node_events)
        world.report_queue.append((tick + latency, report))

    failures = [node for _, node in _due(world.failure_queue, tick)]
    reports = [report for _, report in _due(world.report_queue, tick)]
    changes = [(cid, claims) for _, cid, claims in _due(world.change_queue, tick)]
    arrivals = [e.spec for e in world.scenario.containers if e.arrival == tick]
    actions = world.grm.phase(tick, failures, reports, changes, arrivals)
    for action in actions:
        events.append(Event(tick, GRM, action.kind.value, action.to_payload()))
        events.extend(apply_action(world, action, tick))

    events.extend(_scenario_events(world, tick))
    world.violations += sum(1 for e in events if e.kind == "InvariantViolation")
    world.tick += 1
    return events


def summary_event(world: World, events: Sequence[Event]) -> Event:
    counts: Dict[str, int] = {}
    for e in events:
        counts[e.kind] = counts.get(e.kind, 0) + 1
    return Event(
        world.scenario.horizon,
        SIM,
        "summary",
        {
            "placements": counts.get("Place", 0),
            "redeploys": counts.get("Redeploy", 0),
            "rejects": counts.get("Reject", 0),
            "migrations": counts.get("Migrate", 0),
            "lost": counts.get("Lost", 0),
            "overload_latches": counts.get("OverloadLatched", 0),
            "invariant_violations": counts.get("InvariantViolation", 0),
            "stale_reports": world.view.stale_reports,
        },
    )


def run(scenario: Scenario, parallel: bool = False) -> Trace:
    """
    Simulate ``scenario`` over its whole horizon.

    Args:
        scenario: Validated scenario
        parallel: Run per-node phases on a thread pool

    Returns:
        Trace opening with the scenario header and closing with a summary
    """
    world = build_world(scenario, parallel=parallel)
    events = [header_event(scenario)]
    for _ in range(scenario.horizon):
        events.extend(step(world))
    events.append(summary_event(world, events))
    if world.violations:
        logger.warning("%d invariant violations during run", world.violations)
    return Trace(events)
