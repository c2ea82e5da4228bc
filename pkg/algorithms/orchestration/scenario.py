"""
Scenario Loading and Validation

A scenario document is JSON with an explicit schema version. Loading checks
every field and reference and reports all problems at once, each with a
JSON-path-like location (``containers[2].claims.Cache``).

Document outline:
    {"schema": 1, "seed": 7, "horizon": 200, "defaults": {...},
     "nodes": [...], "containers": [...], "events": [...]}
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

from algorithms.orchestration.config import SimulationDefaults, default_ladders
from algorithms.orchestration.core_model import (
    RESOURCE_ORDER,
    BandLadder,
    ContainerSpec,
    NodeSpec,
    ResourceClaim,
    ResourceKind,
    SchedClass,
    Strictness,
    TtConfig,
    TtParams,
    node_violations,
    spec_violations,
)
from algorithms.orchestration.demand import (
    DemandModel,
    demand_from_document,
    demand_resources,
)
from algorithms.orchestration.errors import ParseError, ScenarioValidationError, Violation
from algorithms.orchestration.schema_check import load_schema, schema_violations

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    NODE_FAIL = "NodeFail"
    REQUEST_CHANGE = "RequestChange"
    DEMAND_CHANGE = "DemandChange"


@dataclass(frozen=True)
class ContainerEntry:
    spec: ContainerSpec
    arrival: int
    demand: DemandModel
    tasks: int = 1
    complies: bool = True


@dataclass(frozen=True)
class ScenarioEvent:
    tick: int
    kind: EventKind
    node_id: Optional[str] = None
    container_id: Optional[str] = None
    claims: Optional[Tuple[ResourceClaim, ...]] = None
    demand: Optional[DemandModel] = None


@dataclass(frozen=True)
class Scenario:
    seed: int
    horizon: int
    nodes: Tuple[NodeSpec, ...]
    containers: Tuple[ContainerEntry, ...]
    events: Tuple[ScenarioEvent, ...]
    defaults: SimulationDefaults
    criticality_ceiling: float
    document: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def container(self, container_id: str) -> ContainerEntry:
        for entry in self.containers:
            if entry.spec.id == container_id:
                return entry
        raise KeyError(container_id)


def _int(doc: Mapping, key: str, default: Optional[int] = None) -> Optional[int]:
    value = doc.get(key, default)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    return None


def _obj(value: Any) -> Mapping:
    return value if isinstance(value, Mapping) else {}


def _array(value: Any) -> List:
    return value if isinstance(value, list) else []


def _resource(name: Any) -> Optional[ResourceKind]:
    try:
        return ResourceKind(name)
    except ValueError:
        return None


def _structural_code(path: List[Any]) -> str:
    if path == ["schema"]:
        return "SchemaVersion"
    if path and path[0] == "nodes" and ("ladders" in path or "ttConfig" in path):
        return "BadNodeSpec"
    if "qosLevels" in path:
        return "BadQosLadder"
    if "ttParams" in path:
        return "BadTtParams"
    return "InvalidField"


class _Checker:
    """
    Collects semantic violations while walking a scenario document.

    Structure and types are checked by schemas/scenario_schema.json first;
    subtrees with a structural violation are skipped here.
    """

    def __init__(self, structural: List[Violation]) -> None:
        self.found: List[Violation] = []
        self._broken = [v.location for v in structural]

    def add(self, code: str, where: str, message: str) -> None:
        self.found.append(Violation(code, where, message))

    def broken(self, where: str) -> bool:
        return any(
            loc == where or loc.startswith(f"{where}.") or loc.startswith(f"{where}[")
            for loc in self._broken
        )

    def ident(self, doc: Mapping, where: str, seen: Set[str]) -> Optional[str]:
        value = doc.get("id")
        if not isinstance(value, str) or not value or "#" in value:
            return None
        if value in seen:
            self.add("InvalidField", f"{where}.id", f"duplicate id {value!r}")
            return None
        seen.add(value)
        return value


def _parse_node(checker: _Checker, doc: Mapping, where: str, seen: Set[str]) -> Optional[NodeSpec]:
    node_id = checker.ident(doc, where, seen)
    if node_id is None or checker.broken(where):
        return None
    ladder_docs = dict(default_ladders())
    ladder_docs.update(_obj(doc.get("ladders")))
    ladders = []
    for name, ladder_doc in ladder_docs.items():
        resource = _resource(name)
        if resource is not None:
            ladders.append(
                BandLadder(resource, float(ladder_doc["capacity"]), int(ladder_doc["levels"]))
            )
    ladders.sort(key=lambda lad: RESOURCE_ORDER.index(lad.resource))

    classes = {SchedClass(name) for name in doc.get("schedClasses", ["General"])}
    tt_config = None
    if "ttConfig" in doc:
        tt_doc = doc["ttConfig"]
        tt_config = TtConfig(
            slot_length=int(tt_doc["slotLength"]), hyperperiod=int(tt_doc["hyperperiod"])
        )
    node = NodeSpec(
        id=node_id,
        ladders=tuple(ladders),
        tags=frozenset(doc.get("tags", [])),
        static_priority=float(doc.get("staticPriority", 0)),
        sched_classes=frozenset(classes),
        tt_config=tt_config,
    )
    checker.found.extend(node_violations(node, where))
    return node


def _parse_claims(
    checker: _Checker, claims_doc: Any, annotations_doc: Any, where: str
) -> Tuple[ResourceClaim, ...]:
    claims_doc = _obj(claims_doc)
    strictness: Dict[ResourceKind, Strictness] = {}
    for name, value in _obj(annotations_doc).items():
        resource = _resource(name)
        if resource is None:
            continue
        if name not in claims_doc:
            checker.add("UnknownRef", f"{where}.annotations.{name}", f"annotation for unclaimed {name}")
        strictness[resource] = Strictness.STRICT if value == "strict" else Strictness.LOOSE
    claims = []
    for name, claim_doc in claims_doc.items():
        resource = _resource(name)
        request = _int(claim_doc, "request", 0)
        limit = _int(claim_doc, "limit", request)
        if resource is None or request is None or limit is None:
            continue
        claims.append(
            ResourceClaim(resource, request, limit, strictness.get(resource, Strictness.LOOSE))
        )
    return tuple(claims)


def _unclaimed_demand(
    checker: _Checker, demand: DemandModel, claimed: Set[ResourceKind], where: str
) -> None:
    for resource in demand_resources(demand):
        if resource not in claimed:
            checker.add("InvalidField", where, f"demand on unclaimed resource {resource.value}")


def _parse_container(
    checker: _Checker,
    doc: Mapping,
    where: str,
    seen: Set[str],
    seed: int,
    horizon: Optional[int],
) -> Optional[ContainerEntry]:
    cid = checker.ident(doc, where, seen)
    if cid is None or checker.broken(where):
        return None
    before = len(checker.found)
    claims = _parse_claims(checker, doc.get("claims", {}), doc.get("annotations"), where)
    tt_params = None
    if "ttParams" in doc:
        tt_doc = doc["ttParams"]
        tt_params = TtParams(*(int(tt_doc[k]) for k in ("period", "runtime", "deadline")))
    arrival = _int(doc, "arrival", 0) or 0
    if horizon is not None and arrival >= horizon:
        checker.add("InvalidField", f"{where}.arrival", f"must be < horizon {horizon}")

    demand, problems = demand_from_document(
        doc.get("demand", {"kind": "Constant", "values": {}}),
        f"{where}.demand",
        seed,
        cid,
        horizon or 1,
    )
    checker.found.extend(problems)
    if demand is not None:
        _unclaimed_demand(checker, demand, {c.resource for c in claims}, f"{where}.demand")

    if len(checker.found) > before or demand is None:
        return None
    spec = ContainerSpec(
        id=cid,
        claims=claims,
        adaptive=doc.get("adaptive", False),
        qos_levels=tuple(float(q) for q in doc.get("qosLevels", [1.0])),
        migratable=doc.get("migratable", False),
        criticality=_int(doc, "criticality", 0) or 0,
        replicas=_int(doc, "replicas", 1) or 1,
        tt_params=tt_params,
    )
    found = spec_violations(spec, f"{where}({cid})")
    checker.found.extend(found)
    if found:
        return None
    return ContainerEntry(
        spec, arrival, demand, _int(doc, "tasks", 1) or 1, doc.get("complies", True)
    )


def _parse_event(
    checker: _Checker,
    doc: Mapping,
    where: str,
    horizon: Optional[int],
    node_ids: Set[str],
    container_ids: Set[str],
    containers: Dict[str, ContainerEntry],
    seed: int,
) -> Optional[ScenarioEvent]:
    if checker.broken(where):
        return None
    before = len(checker.found)
    tick = _int(doc, "tick", 0) or 0
    if horizon is not None and tick >= horizon:
        checker.add("InvalidField", f"{where}.tick", f"must be < horizon {horizon}")
    kind = EventKind(doc["kind"])

    if kind is EventKind.NODE_FAIL:
        node_id = doc.get("node")
        if node_id not in node_ids:
            checker.add("UnknownRef", f"{where}.node", f"unknown node {node_id!r}")
        if len(checker.found) > before:
            return None
        return ScenarioEvent(tick, kind, node_id=node_id)

    cid = doc.get("container")
    if cid not in container_ids:
        checker.add("UnknownRef", f"{where}.container", f"unknown container {cid!r}")
        return None
    if kind is EventKind.REQUEST_CHANGE:
        claims = _parse_claims(checker, doc.get("claims", {}), doc.get("annotations"), where)
        changed = ContainerSpec(id=cid, claims=claims)
        checker.found.extend(v for v in spec_violations(changed, where) if v.code != "BadQosLadder")
        if len(checker.found) > before:
            return None
        return ScenarioEvent(tick, kind, container_id=cid, claims=claims)

    demand, problems = demand_from_document(doc.get("demand"), f"{where}.demand", seed, cid, horizon or 1)
    checker.found.extend(problems)
    if demand is not None and cid in containers:
        _unclaimed_demand(checker, demand, set(containers[cid].spec.resources), f"{where}.demand")
    if len(checker.found) > before or demand is None:
        return None
    return ScenarioEvent(tick, kind, container_id=cid, demand=demand)


def scenario_violations(
    document: Any,
    seed: Optional[int] = None,
    horizon: Optional[int] = None,
) -> Tuple[Optional[Scenario], List[Violation]]:
    """
    Validate a parsed document exhaustively.

    Structural problems come from schemas/scenario_schema.json; references,
    horizons, duplicate ids and spec invariants are checked on the parsed
    values of structurally sound subtrees.

    Args:
        document: Decoded JSON value
        seed: Overrides the document's seed
        horizon: Overrides the document's horizon

    Returns:
        (scenario, violations); scenario is None whenever violations exist
    """
    structural = schema_violations(
        load_schema("scenario_schema.json"), document, code_for=_structural_code
    )
    if horizon is not None:
        structural = [v for v in structural if v.location != "$.horizon"]
        if horizon < 1:
            structural.append(Violation("InvalidField", "$.horizon", "must be >= 1"))
    if seed is not None:
        structural = [v for v in structural if v.location != "$.seed"]
    if not isinstance(document, Mapping):
        return None, structural

    checker = _Checker(structural)
    doc = document
    if seed is None:
        seed = 0 if checker.broken("$.seed") else _int(doc, "seed", 0) or 0
    if horizon is None and not checker.broken("$.horizon"):
        horizon = _int(doc, "horizon")
    elif horizon is not None and horizon < 1:
        horizon = None

    if checker.broken("$.defaults"):
        defaults = SimulationDefaults.from_mapping()
    else:
        defaults = SimulationDefaults.from_mapping(doc.get("defaults"))

    node_ids: Set[str] = set()
    nodes = []
    for i, node_doc in enumerate(_array(doc.get("nodes"))):
        node = _parse_node(checker, _obj(node_doc), f"nodes[{i}]", node_ids)
        if node is not None:
            nodes.append(node)

    container_ids: Set[str] = set()
    containers: Dict[str, ContainerEntry] = {}
    for i, cdoc in enumerate(_array(doc.get("containers"))):
        entry = _parse_container(
            checker, _obj(cdoc), f"containers[{i}]", container_ids, seed, horizon
        )
        if entry is not None:
            containers[entry.spec.id] = entry

    events = []
    for i, edoc in enumerate(_array(doc.get("events"))):
        event = _parse_event(
            checker,
            _obj(edoc),
            f"events[{i}]",
            horizon,
            node_ids,
            container_ids,
            containers,
            seed,
        )
        if event is not None:
            events.append(event)

    found = structural + checker.found
    if found or horizon is None:
        return None, found

    ceiling = defaults.criticality_ceiling
    if ceiling is None:
        crits = [e.spec.criticality for e in containers.values()]
        ceiling = float(np.median(crits)) if crits else 0.0
    scenario = Scenario(
        seed=seed,
        horizon=horizon,
        nodes=tuple(nodes),
        containers=tuple(containers.values()),
        events=tuple(events),
        defaults=defaults,
        criticality_ceiling=ceiling,
        document=dict(doc),
    )
    return scenario, []


def parse_scenario_text(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno} column {e.colno}")


def load_scenario(
    source: Union[str, Path, Mapping[str, Any]],
    seed: Optional[int] = None,
    horizon: Optional[int] = None,
) -> Scenario:
    """
    Load and fully validate a scenario.

    Args:
        source: Path to a JSON document, or the decoded document itself
        seed: Optional seed override
        horizon: Optional horizon override

    Returns:
        Validated Scenario with resolved defaults

    Raises:
        OSError: the file cannot be read
        ParseError: the text is not valid JSON (location = line/column)
        ScenarioValidationError: every violation found, with locations
    """
    if isinstance(source, Mapping):
        document: Any = source
    else:
        document = parse_scenario_text(Path(source).read_text(encoding="utf-8"))
    scenario, found = scenario_violations(document, seed=seed, horizon=horizon)
    if found:
        raise ScenarioValidationError(found)
    assert scenario is not None
    logger.info(
        "loaded scenario: %d nodes, %d containers, %d events, horizon %d",
        len(scenario.nodes),
        len(scenario.containers),
        len(scenario.events),
        scenario.horizon,
    )
    return scenario
