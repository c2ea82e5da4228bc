"""
Global Resource Manager - Cluster-Wide Decisions on Abstract Node State

Placement is filter-then-score: the feasible set is computed from strict
free levels and nominal capacity, then ranked by a weighted sum of scoring
policies. The manager also rebalances on escalated overload reports,
renegotiates request changes, redeploys replicas after node failures and
keeps each node's time-triggered slot table.

Every decision works on a ClusterView; nothing here touches node runtime
state directly.
"""

import copy
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from algorithms.orchestration.config import SimulationDefaults
from algorithms.orchestration.core_model import (
    RESOURCE_ORDER,
    ContainerSpec,
    NodeSpec,
    PriorityClass,
    ResourceClaim,
    ResourceKind,
    claim_payload,
    priority_class,
)
from algorithms.orchestration.errors import (
    EmptyFeasibleSet,
    OrchestrationError,
    UnknownContainer,
)
from algorithms.orchestration.node_manager import NodeStatusReport
from algorithms.orchestration.slot_table import SlotTable, admit_tt, remove_tt_task

logger = logging.getLogger(__name__)


class ActionKind(str, Enum):
    PLACE = "Place"
    REJECT = "Reject"
    MIGRATE = "Migrate"
    REDEPLOY = "Redeploy"
    GRANT_REQUEST_CHANGE = "GrantRequestChange"
    DENY_REQUEST_CHANGE = "DenyRequestChange"
    INSTALL_TT_TABLE = "InstallTtTable"
    LOST = "Lost"
    CONFIRM_THROTTLE = "ConfirmThrottle"


class PolicyName(str, Enum):
    BIN_PACK_BEST_EFFORT = "BinPackBestEffort"
    SPREAD_RESOURCE_INTENSIVE = "SpreadResourceIntensive"
    STATIC_NODE_PRIORITY = "StaticNodePriority"
    HETEROGENEOUS_FIT = "HeterogeneousFit"
    LIGHT_ON_BUSY = "LightOnBusy"


class Status(str, Enum):
    RUNNING = "Running"
    PENDING = "Pending"
    REJECTED = "Rejected"
    LOST = "Lost"


@dataclass(frozen=True)
class GlobalAction:
    kind: ActionKind
    container_id: str
    tick: int
    from_node: Optional[str] = None
    to_node: Optional[str] = None
    reason: str = ""
    report_tick: Optional[int] = None
    claims: Optional[Tuple[ResourceClaim, ...]] = None
    table: Optional[SlotTable] = None

    @property
    def node_id(self) -> Optional[str]:
        return self.to_node or self.from_node

    def to_payload(self) -> Dict:
        payload: Dict = {"container": self.container_id, "reason": self.reason}
        if self.from_node is not None:
            payload["from"] = self.from_node
        if self.to_node is not None:
            payload["to"] = self.to_node
        if self.report_tick is not None:
            payload["report_tick"] = self.report_tick
        if self.claims is not None:
            payload["claims"] = [claim_payload(c) for c in self.claims]
        if self.table is not None:
            payload["table"] = self.table.to_payload()
        return payload


@dataclass(frozen=True)
class ScoringPolicy:
    name: PolicyName
    weight: Fraction


@dataclass
class Registration:
    spec: ContainerSpec
    node_id: Optional[str] = None
    status: Status = Status.PENDING
    qos_level: int = 0
    divergence: Dict[ResourceKind, int] = field(default_factory=dict)


@dataclass
class NodeEntry:
    spec: NodeSpec
    alive: bool = True
    last_seen_tick: int = 0
    last_report: Optional[NodeStatusReport] = None
    tt_table: Optional[SlotTable] = None


@dataclass
class ClusterView:
    """
    The global manager's abstract picture of the cluster.

    Strict reservations are derived from the registry, so a placement
    decrements a node's free strict levels the moment it is recorded.
    """

    defaults: SimulationDefaults
    criticality_ceiling: float = 0.0
    nodes: Dict[str, NodeEntry] = field(default_factory=dict)
    registry: Dict[str, Registration] = field(default_factory=dict)
    pending: List[str] = field(default_factory=list)
    tt_dirty: Set[str] = field(default_factory=set)
    stale_reports: int = 0
    tick: int = 0

    def add_node(self, node: NodeSpec, tick: int = 0) -> None:
        self.nodes[node.id] = NodeEntry(spec=node, last_seen_tick=tick)

    def residents(self, node_id: str) -> List[str]:
        return sorted(
            cid
            for cid, reg in self.registry.items()
            if reg.node_id == node_id and reg.status is Status.RUNNING
        )

    def strict_reserved(self, node_id: str, resource: ResourceKind) -> int:
        return sum(
            self.registry[cid].spec.strict_request(resource)
            for cid in self.residents(node_id)
        )

    def free_strict(self, node_id: str, resource: ResourceKind) -> int:
        levels = self.nodes[node_id].spec.levels(resource)
        return levels - self.strict_reserved(node_id, resource)

    def reported_band(self, cid: str, resource: ResourceKind) -> int:
        reg = self.registry[cid]
        if reg.node_id is None:
            return 0
        report = self.nodes[reg.node_id].last_report
        if report is None or cid not in report.containers:
            return 0
        return report.containers[cid].bands.get(resource, 0)

    def committed(self, cid: str, resource: ResourceKind) -> int:
        """Strict request for Strict claims, reported band for Loose ones."""
        claim = self.registry[cid].spec.claim_for(resource)
        if claim is None:
            return 0
        if claim.is_strict:
            return claim.request_levels
        return self.reported_band(cid, resource)

    def is_stale(self, node_id: str) -> bool:
        entry = self.nodes[node_id]
        return self.tick - entry.last_seen_tick > self.defaults.staleness_window

    def live_nodes(self) -> List[str]:
        return sorted(n for n, e in self.nodes.items() if e.alive)

    def migration_eligible(self, spec: ContainerSpec) -> bool:
        return spec.migratable or spec.criticality < self.criticality_ceiling

    def snapshot(self) -> "ClusterView":
        return copy.deepcopy(self)

    def restore(self, snapshot: "ClusterView") -> None:
        self.__dict__.update(copy.deepcopy(snapshot).__dict__)

    def record_placement(self, spec: ContainerSpec, node_id: Optional[str]) -> None:
        reg = self.registry.setdefault(spec.id, Registration(spec=spec))
        reg.spec = spec
        if node_id is None:
            reg.node_id = None
            return
        reg.node_id = node_id
        reg.status = Status.RUNNING
        reg.divergence.clear()
        if spec.id in self.pending:
            self.pending.remove(spec.id)

    def _set_table(self, node_id: str, table: Optional[SlotTable]) -> None:
        self.nodes[node_id].tt_table = table
        self.tt_dirty.add(node_id)

    def drain_tt_installs(self, tick: int) -> List[GlobalAction]:
        actions = []
        for node_id in sorted(self.tt_dirty):
            entry = self.nodes[node_id]
            if entry.alive and entry.tt_table is not None:
                actions.append(
                    GlobalAction(
                        ActionKind.INSTALL_TT_TABLE,
                        ",".join(entry.tt_table.container_ids),
                        tick,
                        to_node=node_id,
                        reason="tt-admission",
                        table=entry.tt_table,
                    )
                )
        self.tt_dirty.clear()
        return actions


def replica_specs(spec: ContainerSpec) -> List[ContainerSpec]:
    """Replica k of ``spec`` is named ``id`` for k = 0 and ``id#k`` otherwise."""
    return [
        spec if k == 0 else replace(spec, id=f"{spec.id}#{k}")
        for k in range(spec.replicas)
    ]


def base_id(container_id: str) -> str:
    return container_id.split("#", 1)[0]


def policies_from_weights(weights: Mapping[str, float]) -> List[ScoringPolicy]:
    return [
        ScoringPolicy(PolicyName(name), Fraction(str(weight)))
        for name, weight in sorted(weights.items())
    ]


def filter_nodes(
    view: ClusterView, spec: ContainerSpec, exclude: Iterable[str] = ()
) -> List[str]:
    """
    Nodes able to host ``spec``, sorted by id.

    A node is feasible when it is live with a fresh report, has enough free
    strict levels for every Strict claim, nominal capacity for every Loose
    claim, and (for TT containers) a feasible slot table.
    """
    skip = set(exclude)
    feasible = []
    for node_id in view.live_nodes():
        if node_id in skip or view.is_stale(node_id):
            continue
        node = view.nodes[node_id].spec
        ok = True
        for claim in spec.claims:
            if claim.is_strict:
                ok = view.free_strict(node_id, claim.resource) >= claim.request_levels
            else:
                ok = node.levels(claim.resource) >= claim.request_levels
            if not ok:
                break
        if ok and spec.tt_params is not None:
            try:
                admit_tt(node, view.nodes[node_id].tt_table, spec.id, spec.tt_params)
            except OrchestrationError:
                ok = False
        if ok:
            feasible.append(node_id)
    return feasible


def _utilization(view: ClusterView, node_id: str) -> Fraction:
    node = view.nodes[node_id].spec
    total = sum(
        (
            Fraction(view.strict_reserved(node_id, r), node.levels(r))
            for r in RESOURCE_ORDER
        ),
        Fraction(0),
    )
    return total / len(RESOURCE_ORDER)


def _is_intensive(spec: ContainerSpec, node: NodeSpec) -> bool:
    return any(
        spec.strict_request(c.resource) * 2 > node.levels(c.resource)
        for c in spec.claims
    )


def _best_effort_count(view: ClusterView, node_id: str) -> int:
    return sum(
        1
        for cid in view.residents(node_id)
        if priority_class(view.registry[cid].spec) is PriorityClass.BEST_EFFORT
    )


def policy_score(
    policy: PolicyName,
    view: ClusterView,
    node_id: str,
    spec: ContainerSpec,
    feasible: Sequence[str],
) -> Fraction:
    """Score of one policy for ``spec`` on ``node_id``, in [0, 1]."""
    node = view.nodes[node_id].spec
    if policy is PolicyName.BIN_PACK_BEST_EFFORT:
        if any(spec.strict_request(r) > 0 for r in spec.resources):
            return Fraction(0)
        top = max(_best_effort_count(view, n) for n in feasible)
        if top == 0:
            return Fraction(0)
        return Fraction(_best_effort_count(view, node_id), top)
    if policy is PolicyName.SPREAD_RESOURCE_INTENSIVE:
        if not _is_intensive(spec, node):
            return Fraction(0)
        return 1 - _utilization(view, node_id)
    if policy is PolicyName.STATIC_NODE_PRIORITY:
        top = max(Fraction(view.nodes[n].spec.static_priority) for n in feasible)
        if top == 0:
            return Fraction(0)
        return Fraction(node.static_priority) / top
    if policy is PolicyName.HETEROGENEOUS_FIT:
        levels = node.levels(ResourceKind.CPU_TIME)
        claim = spec.claim_for(ResourceKind.CPU_TIME)
        request = claim.request_levels if claim else 0
        free = view.free_strict(node_id, ResourceKind.CPU_TIME)
        return 1 - abs(Fraction(request, levels) - Fraction(free, levels))
    if policy is PolicyName.LIGHT_ON_BUSY:
        if _is_intensive(spec, node):
            return Fraction(0)
        return _utilization(view, node_id)
    raise ValueError(f"unknown policy {policy}")


def score_nodes(
    view: ClusterView,
    feasible: Sequence[str],
    spec: ContainerSpec,
    policies: Sequence[ScoringPolicy],
) -> List[Tuple[str, Fraction]]:
    """
    Rank feasible nodes by normalized weighted score.

    Returns:
        (node_id, score) pairs, best first; ties go to the smaller node id

    Raises:
        EmptyFeasibleSet: ``feasible`` is empty
    """
    if not feasible:
        raise EmptyFeasibleSet(f"no feasible node for {spec.id}")
    total = sum((p.weight for p in policies), Fraction(0))
    scored = []
    for node_id in feasible:
        score = Fraction(0)
        if total > 0:
            for p in policies:
                if p.weight:
                    score += (p.weight / total) * policy_score(
                        p.name, view, node_id, spec, feasible
                    )
        scored.append((node_id, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def _policies(view: ClusterView) -> List[ScoringPolicy]:
    return policies_from_weights(view.defaults.policy_weights)


def _choose_node(
    view: ClusterView, spec: ContainerSpec, exclude: Iterable[str] = ()
) -> Tuple[Optional[str], str]:
    feasible = filter_nodes(view, spec, exclude)
    if not feasible:
        return None, "NoFeasibleNode"
    siblings = {
        view.registry[cid].node_id
        for cid in view.registry
        if cid != spec.id
        and base_id(cid) == base_id(spec.id)
        and view.registry[cid].status is Status.RUNNING
    }
    separated = [n for n in feasible if n not in siblings]
    if separated:
        feasible = separated
    elif siblings and view.defaults.anti_affinity == "mandatory":
        return None, "AntiAffinity"
    ranked = score_nodes(view, feasible, spec, _policies(view))
    return ranked[0][0], ""


def _move_tt(
    view: ClusterView, spec: ContainerSpec, from_node: Optional[str], to_node: str
) -> None:
    if spec.tt_params is None:
        return
    if from_node is not None:
        _drop_tt(view, spec.id, from_node)
    entry = view.nodes[to_node]
    view._set_table(
        to_node, admit_tt(entry.spec, entry.tt_table, spec.id, spec.tt_params)
    )


def _drop_tt(view: ClusterView, cid: str, node_id: str) -> None:
    entry = view.nodes[node_id]
    if entry.tt_table is not None and cid in entry.tt_table.container_ids:
        view._set_table(node_id, remove_tt_task(entry.spec, entry.tt_table, cid))


def place(
    view: ClusterView,
    spec: ContainerSpec,
    tick: int,
    kind: ActionKind = ActionKind.PLACE,
    reason: str = "arrival",
    exclude: Iterable[str] = (),
) -> GlobalAction:
    """
    Place ``spec`` on its top-ranked feasible node, or Reject it.

    Args:
        view: Cluster view, updated in place on success
        spec: Container to place
        tick: Decision tick
        kind: Place for arrivals, Redeploy for failure recovery
        reason: Recorded on the action
        exclude: Nodes not to consider

    Returns:
        The Place/Redeploy action, or Reject with the failure reason
    """
    node_id, why = _choose_node(view, spec, exclude)
    if node_id is None:
        view.record_placement(spec, None)
        reg = view.registry[spec.id]
        reg.status = Status.REJECTED if kind is ActionKind.PLACE else Status.PENDING
        if reg.status is Status.PENDING and spec.id not in view.pending:
            view.pending.append(spec.id)
        logger.warning("reject %s at tick %d: %s", spec.id, tick, why)
        return GlobalAction(ActionKind.REJECT, spec.id, tick, reason=why)
    _move_tt(view, spec, None, node_id)
    view.record_placement(spec, node_id)
    logger.info("%s %s -> %s at tick %d", kind.value, spec.id, node_id, tick)
    return GlobalAction(kind, spec.id, tick, to_node=node_id, reason=reason)


def migrate(
    view: ClusterView,
    cid: str,
    tick: int,
    reason: str,
    report_tick: Optional[int] = None,
    spec: Optional[ContainerSpec] = None,
) -> Optional[GlobalAction]:
    """Move a running container off its node; None when no target exists."""
    reg = view.registry[cid]
    spec = spec or reg.spec
    from_node = reg.node_id
    assert from_node is not None
    target, _ = _choose_node(view, spec, exclude=[from_node])
    if target is None:
        return None
    _move_tt(view, spec, from_node, target)
    view.record_placement(spec, target)
    logger.info("migrate %s %s -> %s at tick %d", cid, from_node, target, tick)
    return GlobalAction(
        ActionKind.MIGRATE,
        cid,
        tick,
        from_node=from_node,
        to_node=target,
        reason=reason,
        report_tick=report_tick,
    )


def _excess(view: ClusterView, cid: str, resources: Iterable[ResourceKind]) -> int:
    spec = view.registry[cid].spec
    total = 0
    for r in resources:
        claim = spec.claim_for(r)
        if claim is not None:
            total += max(0, view.reported_band(cid, r) - claim.request_levels)
    return total


def select_migration_candidates(
    report: NodeStatusReport,
    view: ClusterView,
    shed_levels: Mapping[ResourceKind, int],
) -> List[str]:
    """
    Greedy minimal prefix of eligible residents covering ``shed_levels``.

    Residents are ordered by (migratable desc, criticality asc, band excess
    over request desc, id asc). Containers that are neither migratable nor
    below the criticality ceiling are never selected.
    """
    remaining = {r: n for r, n in shed_levels.items() if n > 0}
    if not remaining:
        return []
    ordered = []
    for cid, status in report.containers.items():
        reg = view.registry.get(cid)
        if reg is None or not view.migration_eligible(reg.spec):
            continue
        if not any(status.bands.get(r, 0) > 0 for r in remaining):
            continue
        excess = sum(
            max(0, status.bands.get(r, 0) - c.request_levels)
            for r in remaining
            for c in [reg.spec.claim_for(r)]
            if c is not None
        )
        ordered.append(
            ((not reg.spec.migratable, reg.spec.criticality, -excess, cid), status)
        )
    ordered.sort(key=lambda item: item[0])

    chosen = []
    for key, status in ordered:
        if all(n <= 0 for n in remaining.values()):
            break
        chosen.append(key[3])
        for r in remaining:
            remaining[r] -= status.bands.get(r, 0)
    return chosen


def _misconfiguration_actions(
    view: ClusterView, report: NodeStatusReport, tick: int
) -> List[GlobalAction]:
    actions = []
    for cid, status in sorted(report.containers.items()):
        reg = view.registry.get(cid)
        if reg is None or reg.node_id != report.node_id:
            continue
        over = False
        for claim in reg.spec.claims:
            if status.bands.get(claim.resource, 0) > claim.limit_levels:
                reg.divergence[claim.resource] = (
                    reg.divergence.get(claim.resource, 0) + 1
                )
                over = over or (
                    reg.divergence[claim.resource] >= view.defaults.divergence_dwell
                )
            else:
                reg.divergence.pop(claim.resource, None)
        if not over:
            continue
        reg.divergence.clear()
        action = None
        if view.defaults.misconfig_policy == "migrate" and view.migration_eligible(
            reg.spec
        ):
            action = migrate(view, cid, tick, "misconfigured", report.tick)
        if action is None:
            action = GlobalAction(
                ActionKind.CONFIRM_THROTTLE,
                cid,
                tick,
                from_node=report.node_id,
                reason="misconfigured",
                report_tick=report.tick,
            )
        actions.append(action)
    return actions


def handle_report(
    view: ClusterView, report: NodeStatusReport, tick: int
) -> List[GlobalAction]:
    """
    Fold a node report into the view and react to escalated overload.

    Stale reports (not newer than the stored one) and reports from failed
    nodes are ignored and counted.
    """
    entry = view.nodes.get(report.node_id)
    if entry is None or not entry.alive:
        view.stale_reports += 1
        return []
    if entry.last_report is not None and report.tick <= entry.last_report.tick:
        view.stale_reports += 1
        logger.warning(
            "stale report from %s (tick %d <= %d)",
            report.node_id,
            report.tick,
            entry.last_report.tick,
        )
        return []
    entry.last_report = report
    entry.last_seen_tick = max(entry.last_seen_tick, report.tick)
    for cid, status in report.containers.items():
        reg = view.registry.get(cid)
        if reg is not None and reg.node_id == report.node_id:
            reg.qos_level = status.qos_level

    actions = _misconfiguration_actions(view, report, tick)

    shed = {
        r: s.aggregate_band - s.threshold + 1
        for r, s in report.resources.items()
        if s.escalated
    }
    if shed:
        for cid in select_migration_candidates(report, view, shed):
            reg = view.registry[cid]
            if reg.node_id != report.node_id:
                continue
            action = migrate(view, cid, tick, "overload", report.tick)
            if action is None:
                logger.info("%s stays on %s: no feasible target", cid, report.node_id)
            else:
                actions.append(action)
        if not any(a.kind is ActionKind.MIGRATE for a in actions):
            logger.warning(
                "overload on %s (%s) persists at tick %d",
                report.node_id,
                ",".join(r.value for r in shed),
                tick,
            )
    return actions + view.drain_tt_installs(tick)


def _shortage(
    view: ClusterView, cid: str, spec: ContainerSpec, node_id: str
) -> Dict[ResourceKind, int]:
    node = view.nodes[node_id].spec
    others = [c for c in view.residents(node_id) if c != cid]
    short = {}
    for claim in spec.claims:
        if not claim.is_strict:
            continue
        used = sum(view.committed(c, claim.resource) for c in others)
        gap = claim.request_levels - (node.levels(claim.resource) - used)
        if gap > 0:
            short[claim.resource] = gap
    return short


def apply_request_change(
    view: ClusterView,
    container_id: str,
    new_claims: Sequence[ResourceClaim],
    tick: int,
) -> List[GlobalAction]:
    """
    Renegotiate a running container's claims.

    Tries, in order: grant in place, migrate other residents to make room,
    migrate the requester. Otherwise the change is denied and the view is
    restored exactly.

    Raises:
        UnknownContainer: ``container_id`` is not a running container
    """
    reg = view.registry.get(container_id)
    if reg is None or reg.status is not Status.RUNNING or reg.node_id is None:
        raise UnknownContainer(f"{container_id} is not running")
    claims = tuple(new_claims)
    new_spec = replace(reg.spec, claims=claims)
    node_id = reg.node_id
    snapshot = view.snapshot()

    def grant(to_node: str) -> GlobalAction:
        view.registry[container_id].spec = new_spec
        return GlobalAction(
            ActionKind.GRANT_REQUEST_CHANGE,
            container_id,
            tick,
            to_node=to_node,
            reason="request-change",
            claims=claims,
        )

    short = _shortage(view, container_id, new_spec, node_id)
    if not short:
        return [grant(node_id)] + view.drain_tt_installs(tick)

    moved: List[GlobalAction] = []
    others = [
        c
        for c in view.residents(node_id)
        if c != container_id and view.migration_eligible(view.registry[c].spec)
    ]
    others.sort(
        key=lambda c: (
            not view.registry[c].spec.migratable,
            view.registry[c].spec.criticality,
            -_excess(view, c, short),
            c,
        )
    )
    for cid in others:
        if not short:
            break
        if not any(view.committed(cid, r) > 0 for r in short):
            continue
        freed = {r: view.committed(cid, r) for r in short}
        action = migrate(view, cid, tick, "request-change")
        if action is None:
            continue
        moved.append(action)
        short = {r: n - freed[r] for r, n in short.items() if n - freed[r] > 0}
    if not short:
        return moved + [grant(node_id)] + view.drain_tt_installs(tick)

    view.restore(snapshot)
    if reg.spec.migratable:
        action = migrate(view, container_id, tick, "request-change", spec=new_spec)
        if action is not None:
            return [action, grant(action.to_node or node_id)] + view.drain_tt_installs(
                tick
            )

    view.restore(snapshot)
    logger.info("deny request change of %s at tick %d", container_id, tick)
    return [
        GlobalAction(
            ActionKind.DENY_REQUEST_CHANGE,
            container_id,
            tick,
            from_node=node_id,
            reason="request-change",
            claims=claims,
        )
    ]


def handle_node_failure(
    view: ClusterView, node_id: str, tick: int
) -> List[GlobalAction]:
    """Redeploy replicated residents of a failed node; the rest are Lost."""
    entry = view.nodes[node_id]
    residents = view.residents(node_id)
    entry.alive = False
    entry.tt_table = None
    view.tt_dirty.discard(node_id)
    actions: List[GlobalAction] = []
    for cid in residents:
        reg = view.registry[cid]
        if reg.spec.replicas > 1:
            actions.append(
                place(
                    view,
                    reg.spec,
                    tick,
                    kind=ActionKind.REDEPLOY,
                    reason="node-failure",
                    exclude=[node_id],
                )
            )
        else:
            reg.node_id = None
            reg.status = Status.LOST
            logger.warning("%s lost with node %s", cid, node_id)
            actions.append(
                GlobalAction(
                    ActionKind.LOST, cid, tick, from_node=node_id, reason="node-failure"
                )
            )
    return actions + view.drain_tt_installs(tick)


def retry_pending(view: ClusterView, tick: int) -> List[GlobalAction]:
    """Retry pending redeploys; failures stay pending without a new Reject."""
    actions = []
    for cid in sorted(view.pending):
        spec = view.registry[cid].spec
        node_id, _ = _choose_node(view, spec)
        if node_id is None:
            continue
        actions.append(
            place(view, spec, tick, kind=ActionKind.REDEPLOY, reason="pending-retry")
        )
    return actions + view.drain_tt_installs(tick)


class GlobalResourceManager:
    """
    Serializes one tick of GRM input into the fixed decision order:
    failure notices, reports (by generation tick, then node id), request
    changes, pending retries, arrivals.
    """

    def __init__(self, view: ClusterView):
        self.view = view

    def phase(
        self,
        tick: int,
        failures: Sequence[str] = (),
        reports: Sequence[NodeStatusReport] = (),
        request_changes: Sequence[Tuple[str, Sequence[ResourceClaim]]] = (),
        arrivals: Sequence[ContainerSpec] = (),
    ) -> List[GlobalAction]:
        view = self.view
        view.tick = tick
        actions: List[GlobalAction] = []
        for node_id in sorted(failures):
            if view.nodes[node_id].alive:
                actions.extend(handle_node_failure(view, node_id, tick))
        for report in sorted(reports, key=lambda r: (r.tick, r.node_id)):
            actions.extend(handle_report(view, report, tick))
        for cid, claims in request_changes:
            reg = view.registry.get(cid)
            if reg is None or reg.status is not Status.RUNNING:
                logger.warning("request change for %s ignored: not running", cid)
                continue
            actions.extend(apply_request_change(view, cid, claims, tick))
        actions.extend(retry_pending(view, tick))
        for spec in arrivals:
            for replica in replica_specs(spec):
                actions.append(place(view, replica, tick))
                actions.extend(view.drain_tt_installs(tick))
        return actions
