"""
Local Resource Manager - Monitoring plus Enforcement on One Node

Combines the band monitor with the local scheduler's enforcement ladder:
overload detection with latching, collaborative QoS reduction, throttling,
and escalation to the global manager through status reports.

Enforcement ladder for a latched resource (one episode):
    1. QosReduceRequest to adaptive containers above their request
    2. after the grace window, Throttle remaining offenders down to request
    3. if still overloaded, ReportToGrm (repeated while the latch holds)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from algorithms.orchestration.config import SimulationDefaults
from algorithms.orchestration.core_model import (
    EPSILON,
    RESOURCE_ORDER,
    ContainerSpec,
    NodeSpec,
    ResourceKind,
    quantize,
)
from algorithms.orchestration.errors import (
    CapacityExceeded,
    MixedTickBatch,
    NotAdaptive,
    UnknownContainer,
    UnsupportedClass,
)
from algorithms.orchestration.monitor import (
    BandState,
    FilterState,
    HealthRecord,
    HealthStatus,
    UsageSample,
    aggregate_container_usage,
    classify_band,
    ewma_update,
    update_health,
)
from algorithms.orchestration.slot_table import SlotTable

logger = logging.getLogger(__name__)

Key = Tuple[str, ResourceKind]


class Mode(str, Enum):
    RELAXED = "Relaxed"
    STRICT_ENFORCEMENT = "StrictEnforcement"


class ActionKind(str, Enum):
    QOS_REDUCE_REQUEST = "QosReduceRequest"
    THROTTLE = "Throttle"
    REPORT_TO_GRM = "ReportToGrm"


_ACTION_RANK = {
    ActionKind.QOS_REDUCE_REQUEST: 0,
    ActionKind.THROTTLE: 1,
    ActionKind.REPORT_TO_GRM: 2,
}


@dataclass(frozen=True)
class EnforcementAction:
    """
    One local corrective step.

    ``detail`` is the required reduction fraction for QosReduceRequest, the
    target level for Throttle, and the aggregate band for ReportToGrm.
    """

    kind: ActionKind
    container_id: str
    resource: ResourceKind
    detail: float
    tick: int


@dataclass
class OverloadState:
    resource: ResourceKind
    threshold: int
    dwell_required: int
    latched: bool = False
    since_tick: Optional[int] = None
    counter: int = 0


@dataclass(frozen=True)
class OverloadChange:
    resource: ResourceKind
    latched: bool
    tick: int
    restored: Tuple[str, ...] = ()


@dataclass
class Escalation:
    stage: int = 0
    stage_tick: int = 0


@dataclass
class Resident:
    spec: ContainerSpec
    qos_index: int = 0
    throttle_caps: Dict[ResourceKind, int] = field(default_factory=dict)
    confirmed_caps: Dict[ResourceKind, int] = field(default_factory=dict)
    complied: bool = False
    refused: bool = False
    granted: Dict[ResourceKind, int] = field(default_factory=dict)

    @property
    def qos_scale(self) -> float:
        return self.spec.qos_levels[self.qos_index]


@dataclass
class NodeRuntimeState:
    node: NodeSpec
    residents: Dict[str, Resident] = field(default_factory=dict)
    filters: Dict[Key, FilterState] = field(default_factory=dict)
    bands: Dict[Key, BandState] = field(default_factory=dict)
    node_filters: Dict[ResourceKind, FilterState] = field(default_factory=dict)
    node_bands: Dict[ResourceKind, BandState] = field(default_factory=dict)
    overload: Dict[ResourceKind, OverloadState] = field(default_factory=dict)
    modes: Dict[ResourceKind, Mode] = field(default_factory=dict)
    escalations: Dict[ResourceKind, Escalation] = field(default_factory=dict)
    escalated: Set[ResourceKind] = field(default_factory=set)
    health: Dict[str, HealthRecord] = field(default_factory=dict)
    tt_active: Optional[SlotTable] = None
    tt_pending: Optional[SlotTable] = None
    tt_activated_tick: Optional[int] = None
    last_tick: int = -1

    def strict_reserved(self, resource: ResourceKind) -> int:
        return sum(r.spec.strict_request(resource) for r in self.residents.values())

    def band(self, cid: str, resource: ResourceKind) -> int:
        state = self.bands.get((cid, resource))
        return state.current_band if state is not None else 0

    def smoothed(self, cid: str, resource: ResourceKind) -> float:
        state = self.filters.get((cid, resource))
        return state.smoothed if state is not None and state.smoothed else 0.0


@dataclass(frozen=True)
class ResourceStatus:
    levels: int
    free_strict_levels: int
    aggregate_band: int
    threshold: int
    overloaded: bool
    escalated: bool


@dataclass(frozen=True)
class ContainerStatus:
    bands: Dict[ResourceKind, int]
    qos_level: int
    health: HealthStatus


@dataclass(frozen=True)
class NodeStatusReport:
    """Abstract node state shipped to the global manager."""

    node_id: str
    tick: int
    resources: Dict[ResourceKind, ResourceStatus]
    containers: Dict[str, ContainerStatus]

    @property
    def escalated(self) -> List[ResourceKind]:
        return [r for r in RESOURCE_ORDER if self.resources[r].escalated]

    def to_payload(self) -> Dict:
        return {
            "node": self.node_id,
            "tick": self.tick,
            "resources": {
                r.value: {
                    "levels": s.levels,
                    "free_strict": s.free_strict_levels,
                    "band": s.aggregate_band,
                    "threshold": s.threshold,
                    "overloaded": s.overloaded,
                    "escalated": s.escalated,
                }
                for r, s in self.resources.items()
            },
            "containers": {
                cid: {
                    "bands": {r.value: b for r, b in c.bands.items()},
                    "qos": c.qos_level,
                    "health": c.health.value,
                }
                for cid, c in sorted(self.containers.items())
            },
        }


def qos_negotiate(
    spec: ContainerSpec, current_level_index: int, required_reduction_fraction: float
) -> Optional[int]:
    """
    Pick the least-reducing QoS level meeting a requested reduction.

    Args:
        spec: Adaptive container spec
        current_level_index: Index into spec.qos_levels currently in effect
        required_reduction_fraction: Fraction of the current demand to shed

    Returns:
        New level index, or None when no level reduces enough (Refuse)
    """
    if not spec.adaptive:
        raise NotAdaptive(f"container {spec.id} does not negotiate QoS")
    levels = spec.qos_levels
    target = levels[current_level_index] * (1.0 - required_reduction_fraction)
    for index in range(current_level_index, len(levels)):
        if levels[index] <= target + EPSILON:
            return index
    return None


class LocalResourceManager:
    """
    Owns one node's runtime state; every method mutates only that state.
    """

    def __init__(self, node: NodeSpec, defaults: SimulationDefaults):
        self.defaults = defaults
        self.state = NodeRuntimeState(node=node)
        for resource in RESOURCE_ORDER:
            ladder = node.ladder(resource)
            threshold = ladder.levels - 1
            if defaults.overload_threshold is not None:
                threshold = min(defaults.overload_threshold, threshold)
            self.state.node_filters[resource] = FilterState(alpha=defaults.alpha)
            self.state.node_bands[resource] = self._fresh_band(resource)
            self.state.overload[resource] = OverloadState(
                resource=resource,
                threshold=threshold,
                dwell_required=defaults.overload_dwell,
            )
            self.state.modes[resource] = Mode.RELAXED
            self.state.escalations[resource] = Escalation()

    @property
    def node(self) -> NodeSpec:
        return self.state.node

    def _fresh_band(self, resource: ResourceKind) -> BandState:
        width = self.node.ladder(resource).level_width
        return BandState(
            hysteresis=self.defaults.hysteresis_fraction * width,
            dwell_required=self.defaults.dwell,
        )

    # -- residency -----------------------------------------------------------

    def _check_capacity(self, spec: ContainerSpec, ignore: str = "") -> None:
        for resource in spec.resources:
            reserved = sum(
                r.spec.strict_request(resource)
                for cid, r in self.state.residents.items()
                if cid != ignore
            )
            if reserved + spec.strict_request(resource) > self.node.levels(resource):
                raise CapacityExceeded(
                    f"{spec.id} needs {spec.strict_request(resource)} strict "
                    f"{resource.value} levels on {self.node.id}, "
                    f"{self.node.levels(resource) - reserved} free"
                )

    def admit(self, spec: ContainerSpec, tick: int, qos_index: int = 0) -> Resident:
        """Make ``spec`` resident with fresh monitor state."""
        self._check_capacity(spec)
        resident = Resident(spec=spec, qos_index=qos_index)
        self.state.residents[spec.id] = resident
        for resource in spec.resources:
            self.state.filters[(spec.id, resource)] = FilterState(
                alpha=self.defaults.alpha
            )
            self.state.bands[(spec.id, resource)] = self._fresh_band(resource)
        self.state.health[spec.id] = HealthRecord(
            subject=spec.id, node_id=self.node.id, last_seen_tick=tick
        )
        logger.info("node %s admitted %s at tick %d", self.node.id, spec.id, tick)
        return resident

    def evict(self, cid: str) -> Resident:
        if cid not in self.state.residents:
            raise UnknownContainer(f"{cid} is not resident on {self.node.id}")
        resident = self.state.residents.pop(cid)
        for resource in resident.spec.resources:
            self.state.filters.pop((cid, resource), None)
            self.state.bands.pop((cid, resource), None)
        self.state.health.pop(cid, None)
        return resident

    def mark_failed(self, tick: int) -> List[str]:
        """Force every resident's health record to Failed; returns the ids that changed."""
        before = self.state.health
        self.state.health = update_health(
            before,
            tick,
            failed_nodes={self.node.id},
            staleness_window=self.defaults.staleness_window,
        )
        changed = [
            cid
            for cid, record in sorted(self.state.health.items())
            if record.status is not before[cid].status
        ]
        logger.warning(
            "node %s failed at tick %d; %d resident(s) marked Failed",
            self.node.id,
            tick,
            len(changed),
        )
        return changed

    def update_claims(self, spec: ContainerSpec) -> None:
        """Swap in changed claims for a resident, keeping its monitor state."""
        resident = self._resident(spec.id)
        self._check_capacity(spec, ignore=spec.id)
        old = set(resident.spec.resources)
        resident.spec = spec
        for resource in spec.resources:
            if resource not in old:
                self.state.filters[(spec.id, resource)] = FilterState(
                    alpha=self.defaults.alpha
                )
                self.state.bands[(spec.id, resource)] = self._fresh_band(resource)
        resident.throttle_caps.clear()

    def _resident(self, cid: str) -> Resident:
        try:
            return self.state.residents[cid]
        except KeyError:
            raise UnknownContainer(f"{cid} is not resident on {self.node.id}")

    def set_qos_level(self, cid: str, level_index: int) -> None:
        resident = self._resident(cid)
        resident.qos_index = level_index
        resident.complied = True

    def mark_refused(self, cid: str) -> None:
        self._resident(cid).refused = True

    def confirm_cap(self, cid: str) -> List[ResourceKind]:
        """Cap every claim observed above its limit at the limit."""
        resident = self._resident(cid)
        capped = []
        for claim in resident.spec.claims:
            if self.state.band(cid, claim.resource) > claim.limit_levels:
                resident.confirmed_caps[claim.resource] = claim.limit_levels
                capped.append(claim.resource)
        return capped

    def demand_cap(self, cid: str, resource: ResourceKind) -> Optional[float]:
        """Native-unit ceiling on next-tick demand, or None when uncapped."""
        resident = self._resident(cid)
        caps = [
            c
            for c in (
                resident.throttle_caps.get(resource),
                resident.confirmed_caps.get(resource),
            )
            if c is not None
        ]
        if not caps:
            return None
        return min(caps) * self.node.ladder(resource).level_width

    # -- monitoring ----------------------------------------------------------

    def _activate_pending_tt(self, tick: int) -> None:
        cfg = self.node.tt_config
        if self.state.tt_pending is not None and cfg and tick % cfg.hyperperiod == 0:
            self.state.tt_active = self.state.tt_pending
            self.state.tt_pending = None
            self.state.tt_activated_tick = tick
            logger.info("node %s activated TT table at tick %d", self.node.id, tick)

    def ingest_tick(
        self, samples: Iterable[UsageSample], tick: int
    ) -> NodeRuntimeState:
        """
        Advance every monitor on this node by one tick.

        Args:
            samples: Task samples of this node for ``tick``
            tick: Current tick

        Returns:
            The updated runtime state
        """
        self._activate_pending_tt(tick)
        batch = list(samples)
        for sample in batch:
            if sample.tick != tick:
                raise MixedTickBatch(f"sample for tick {sample.tick} at tick {tick}")
            if sample.container_id not in self.state.residents:
                raise UnknownContainer(
                    f"sample from {sample.container_id} on {self.node.id}"
                )

        totals = aggregate_container_usage(batch)
        for (cid, resource), total in sorted(
            totals.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
        ):
            key = (cid, resource)
            if key not in self.state.filters:
                continue
            filt = ewma_update(self.state.filters[key], total)
            self.state.filters[key] = filt
            self.state.bands[key] = classify_band(
                self.node.ladder(resource), filt, self.state.bands[key]
            )

        # a node emptied after use observes zero; a silent populated node keeps its state
        emptied = not self.state.residents and any(
            f.initialized for f in self.state.node_filters.values()
        )
        if batch or emptied:
            for resource in RESOURCE_ORDER:
                aggregate = sum(
                    total for (_, r), total in totals.items() if r is resource
                )
                filt = ewma_update(self.state.node_filters[resource], aggregate)
                self.state.node_filters[resource] = filt
                self.state.node_bands[resource] = classify_band(
                    self.node.ladder(resource), filt, self.state.node_bands[resource]
                )

        self.state.health = update_health(
            self.state.health,
            tick,
            observed={cid for cid, _ in totals},
            staleness_window=self.defaults.staleness_window,
        )
        self.state.last_tick = tick
        return self.state

    # -- enforcement ---------------------------------------------------------

    def detect_overload(self, tick: int) -> List[OverloadChange]:
        """Latch or unlatch overload per resource using the dwell rule."""
        changes: List[OverloadChange] = []
        for resource in RESOURCE_ORDER:
            ov = self.state.overload[resource]
            above = self.state.node_bands[resource].current_band >= ov.threshold
            if not ov.latched:
                ov.counter = ov.counter + 1 if above else 0
                if ov.counter >= ov.dwell_required:
                    ov.latched, ov.since_tick, ov.counter = True, tick, 0
                    self.state.modes[resource] = Mode.STRICT_ENFORCEMENT
                    self.state.escalations[resource] = Escalation(stage_tick=tick)
                    logger.info(
                        "node %s overload latched on %s at tick %d",
                        self.node.id,
                        resource.value,
                        tick,
                    )
                    changes.append(OverloadChange(resource, True, tick))
            else:
                ov.counter = ov.counter + 1 if not above else 0
                if ov.counter >= ov.dwell_required:
                    ov.latched, ov.since_tick, ov.counter = False, None, 0
                    self.state.modes[resource] = Mode.RELAXED
                    self.state.escalations[resource] = Escalation()
                    restored = self._relax(resource)
                    logger.info(
                        "node %s overload cleared on %s at tick %d",
                        self.node.id,
                        resource.value,
                        tick,
                    )
                    changes.append(OverloadChange(resource, False, tick, restored))
        return changes

    def _relax(self, resource: ResourceKind) -> Tuple[str, ...]:
        for resident in self.state.residents.values():
            resident.throttle_caps.pop(resource, None)
        if any(m is Mode.STRICT_ENFORCEMENT for m in self.state.modes.values()):
            return ()
        restored = []
        for cid, resident in sorted(self.state.residents.items()):
            if resident.qos_index != 0:
                restored.append(cid)
            resident.qos_index = 0
            resident.complied = resident.refused = False
        return tuple(restored)

    def _over_request(self, cid: str, resource: ResourceKind) -> int:
        claim = self.state.residents[cid].spec.claim_for(resource)
        if claim is None:
            return 0
        return max(0, self.state.band(cid, resource) - claim.request_levels)

    def _qos_requests(self, resource: ResourceKind, tick: int) -> List[EnforcementAction]:
        ladder = self.node.ladder(resource)
        ov = self.state.overload[resource]
        asked = [
            cid
            for cid, r in sorted(self.state.residents.items())
            if r.spec.adaptive and self._over_request(cid, resource) > 0
        ]
        if not asked:
            return []
        node_usage = self.state.node_filters[resource].smoothed or 0.0
        goal = ov.threshold * ladder.level_width - self.state.node_bands[
            resource
        ].hysteresis
        usage = sum(self.state.smoothed(cid, resource) for cid in asked)
        fraction = 0.0
        if usage > 0:
            fraction = min(1.0, max(0.0, (node_usage - goal) / usage))
        return [
            EnforcementAction(
                ActionKind.QOS_REDUCE_REQUEST, cid, resource, fraction, tick
            )
            for cid in asked
        ]

    def _throttles(self, resource: ResourceKind, tick: int) -> List[EnforcementAction]:
        ladder = self.node.ladder(resource)
        ov = self.state.overload[resource]
        candidates = []
        for cid, resident in self.state.residents.items():
            excess = self._over_request(cid, resource)
            if excess == 0 or resource in resident.throttle_caps:
                continue
            if resident.spec.adaptive and resident.complied:
                continue
            candidates.append((resident.spec.criticality, -excess, cid))
        candidates.sort()

        projected = self.state.node_filters[resource].smoothed or 0.0
        actions = []
        for _, _, cid in candidates:
            if quantize(projected, ladder) < ov.threshold:
                break
            resident = self.state.residents[cid]
            claim = resident.spec.claim_for(resource)
            assert claim is not None
            cap = claim.request_levels
            resident.throttle_caps[resource] = cap
            projected = max(
                0.0,
                projected
                - max(0.0, self.state.smoothed(cid, resource) - cap * ladder.level_width),
            )
            actions.append(
                EnforcementAction(ActionKind.THROTTLE, cid, resource, float(cap), tick)
            )
        return actions

    def _report(self, resource: ResourceKind, tick: int) -> EnforcementAction:
        self.state.escalated.add(resource)
        band = self.state.node_bands[resource].current_band
        return EnforcementAction(ActionKind.REPORT_TO_GRM, "", resource, float(band), tick)

    def enforce(self, tick: int) -> List[EnforcementAction]:
        """
        Run the escalation ladder for every latched resource.

        Returns:
            Actions of this tick: QoS requests, then throttles, then reports
        """
        self.state.escalated.clear()
        actions: List[EnforcementAction] = []
        grace = self.defaults.grace
        for resource in RESOURCE_ORDER:
            if self.state.modes[resource] is Mode.RELAXED:
                continue
            esc = self.state.escalations[resource]
            if esc.stage == 0:
                actions.extend(self._qos_requests(resource, tick))
                esc.stage, esc.stage_tick = 1, tick
            elif esc.stage == 1 and tick - esc.stage_tick >= grace:
                throttles = self._throttles(resource, tick)
                actions.extend(throttles)
                if throttles:
                    esc.stage, esc.stage_tick = 2, tick
                else:
                    actions.append(self._report(resource, tick))
                    esc.stage, esc.stage_tick = 3, tick
            elif esc.stage == 2 and tick - esc.stage_tick >= grace:
                actions.append(self._report(resource, tick))
                esc.stage, esc.stage_tick = 3, tick
            elif (
                esc.stage == 3 and tick - esc.stage_tick >= self.defaults.escalation_retry
            ):
                actions.append(self._report(resource, tick))
                esc.stage_tick = tick
        actions.sort(key=lambda a: _ACTION_RANK[a.kind])
        self._update_grants()
        return actions

    def _update_grants(self) -> None:
        for cid, resident in self.state.residents.items():
            granted = {}
            for claim in resident.spec.claims:
                cap = claim.limit_levels
                for extra in (
                    resident.throttle_caps.get(claim.resource),
                    resident.confirmed_caps.get(claim.resource),
                ):
                    if extra is not None:
                        cap = min(cap, extra)
                level = min(self.state.band(cid, claim.resource), cap)
                if claim.is_strict:
                    level = max(level, claim.request_levels)
                granted[claim.resource] = level
            resident.granted = granted

    # -- reporting -----------------------------------------------------------

    def build_status_report(self, tick: int) -> NodeStatusReport:
        """Snapshot the abstract node state; the report shares no live objects."""
        resources = {}
        for resource in RESOURCE_ORDER:
            levels = self.node.levels(resource)
            ov = self.state.overload[resource]
            resources[resource] = ResourceStatus(
                levels=levels,
                free_strict_levels=max(0, levels - self.state.strict_reserved(resource)),
                aggregate_band=self.state.node_bands[resource].current_band,
                threshold=ov.threshold,
                overloaded=ov.latched,
                escalated=resource in self.state.escalated,
            )
        containers = {}
        for cid, resident in sorted(self.state.residents.items()):
            record = self.state.health.get(cid)
            containers[cid] = ContainerStatus(
                bands={r: self.state.band(cid, r) for r in resident.spec.resources},
                qos_level=resident.qos_index,
                health=record.status if record else HealthStatus.STALE,
            )
        return NodeStatusReport(
            node_id=self.node.id, tick=tick, resources=resources, containers=containers
        )

    def install_tt_table(self, table: SlotTable, tick: int) -> NodeRuntimeState:
        """
        Stage a time-triggered table; it goes live at the next hyperperiod start.
        """
        if not self.node.supports_tt:
            raise UnsupportedClass(f"node {self.node.id} has no TimeTriggered class")
        self.state.tt_pending = table
        self._activate_pending_tt(tick)
        return self.state
