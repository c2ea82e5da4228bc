"""
Core Model - Shared Vocabulary

Resource kinds, band ladders (capacity quantized into allocation levels),
container and node specifications, and priority classification.
All types here are immutable values.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

from algorithms.orchestration.errors import (
    InvalidAmount,
    SpecValidationError,
    Violation,
)

EPSILON = 1e-9


class ResourceKind(str, Enum):
    CPU_TIME = "CpuTime"
    MEMORY_SPACE = "MemorySpace"
    MEMORY_BANDWIDTH = "MemoryBandwidth"
    CACHE = "Cache"
    INTERCONNECT = "Interconnect"


RESOURCE_ORDER: Tuple[ResourceKind, ...] = tuple(ResourceKind)


class Strictness(str, Enum):
    STRICT = "Strict"
    LOOSE = "Loose"


class PriorityClass(str, Enum):
    GUARANTEED = "Guaranteed"
    BURSTABLE = "Burstable"
    BEST_EFFORT = "BestEffort"


class SchedClass(str, Enum):
    GENERAL = "General"
    TIME_TRIGGERED = "TimeTriggered"


@dataclass(frozen=True)
class BandLadder:
    """A node resource's capacity split into ``levels`` equal bands."""

    resource: ResourceKind
    capacity: float
    levels: int

    @property
    def level_width(self) -> float:
        return self.capacity / self.levels

    def boundary(self, b: int) -> float:
        """Lower edge of level ``b`` (``b == levels`` gives the capacity)."""
        return b * self.level_width


@dataclass(frozen=True)
class ResourceClaim:
    resource: ResourceKind
    request_levels: int
    limit_levels: int
    strictness: Strictness = Strictness.LOOSE

    @property
    def is_strict(self) -> bool:
        return self.strictness is Strictness.STRICT


@dataclass(frozen=True)
class TtParams:
    """Time-triggered job parameters, all in ticks."""

    period: int
    runtime: int
    deadline: int


@dataclass(frozen=True)
class TtConfig:
    slot_length: int
    hyperperiod: int


@dataclass(frozen=True)
class ContainerSpec:
    id: str
    claims: Tuple[ResourceClaim, ...] = ()
    adaptive: bool = False
    qos_levels: Tuple[float, ...] = (1.0,)
    migratable: bool = False
    criticality: int = 0
    replicas: int = 1
    tt_params: Optional[TtParams] = None

    def claim_for(self, resource: ResourceKind) -> Optional[ResourceClaim]:
        for claim in self.claims:
            if claim.resource is resource:
                return claim
        return None

    def strict_request(self, resource: ResourceKind) -> int:
        """Levels this spec reserves on ``resource`` (0 for Loose claims)."""
        claim = self.claim_for(resource)
        if claim is None or not claim.is_strict:
            return 0
        return claim.request_levels

    @property
    def resources(self) -> List[ResourceKind]:
        return [c.resource for c in self.claims]


@dataclass(frozen=True)
class NodeSpec:
    id: str
    ladders: Tuple[BandLadder, ...]
    tags: FrozenSet[str] = field(default_factory=frozenset)
    static_priority: float = 0.0
    sched_classes: FrozenSet[SchedClass] = frozenset({SchedClass.GENERAL})
    tt_config: Optional[TtConfig] = None

    def ladder(self, resource: ResourceKind) -> BandLadder:
        for ladder in self.ladders:
            if ladder.resource is resource:
                return ladder
        raise KeyError(f"node {self.id} has no ladder for {resource.value}")

    def levels(self, resource: ResourceKind) -> int:
        return self.ladder(resource).levels

    @property
    def supports_tt(self) -> bool:
        return SchedClass.TIME_TRIGGERED in self.sched_classes


def quantize(amount: float, ladder: BandLadder) -> int:
    """
    Map an amount in resource-native units to its level index.

    Intervals are half-open ([b*w, (b+1)*w)) except the top level, which also
    holds everything at or above capacity.

    Args:
        amount: Non-negative usage or demand
        ladder: Ladder of the resource being measured

    Returns:
        Level index in 0..levels-1
    """
    if amount < 0:
        raise InvalidAmount(f"negative amount {amount} for {ladder.resource.value}")
    return min(int(amount // ladder.level_width), ladder.levels - 1)


def priority_class(spec: ContainerSpec) -> PriorityClass:
    """Derive the Kubernetes-style priority class from requests and limits."""
    if all(c.request_levels == 0 for c in spec.claims):
        return PriorityClass.BEST_EFFORT
    if all(c.request_levels == c.limit_levels > 0 for c in spec.claims):
        return PriorityClass.GUARANTEED
    return PriorityClass.BURSTABLE


def spec_violations(spec: ContainerSpec, location: str = "") -> List[Violation]:
    """Every invariant ``spec`` breaks, in declaration order."""
    where = location or f"container {spec.id}"
    found: List[Violation] = []

    seen = set()
    for i, claim in enumerate(spec.claims):
        at = f"{where}.claims.{claim.resource.value}"
        if claim.resource in seen:
            found.append(
                Violation(
                    "DuplicateResourceClaim",
                    at,
                    f"{claim.resource.value} claimed more than once",
                )
            )
        seen.add(claim.resource)
        if claim.request_levels < 0:
            found.append(
                Violation("InvalidField", at, "request_levels must be >= 0")
            )
        if claim.limit_levels < claim.request_levels:
            found.append(
                Violation(
                    "LimitBelowRequest",
                    at,
                    f"limit {claim.limit_levels} < request {claim.request_levels}",
                )
            )

    levels = spec.qos_levels
    ladder_ok = (
        len(levels) >= 1
        and levels[0] == 1.0
        and all(0.0 < q <= 1.0 for q in levels)
        and all(a > b for a, b in zip(levels, levels[1:]))
    )
    if not ladder_ok:
        found.append(
            Violation(
                "BadQosLadder",
                f"{where}.qos_levels",
                "must start at 1.0 and strictly decrease within (0, 1]",
            )
        )
    elif not spec.adaptive and len(levels) != 1:
        found.append(
            Violation(
                "BadQosLadder",
                f"{where}.qos_levels",
                "non-adaptive containers have qos_levels [1.0]",
            )
        )

    tt = spec.tt_params
    if tt is not None and not (0 < tt.runtime <= tt.deadline <= tt.period):
        found.append(
            Violation(
                "BadTtParams",
                f"{where}.tt_params",
                f"need 0 < runtime ({tt.runtime}) <= deadline ({tt.deadline}) "
                f"<= period ({tt.period})",
            )
        )

    if spec.replicas < 1:
        found.append(Violation("InvalidField", f"{where}.replicas", "must be >= 1"))
    return found


def validate_spec(spec: ContainerSpec) -> ContainerSpec:
    """
    Return ``spec`` unchanged when it is well formed.

    Raises:
        SpecValidationError: carrying one Violation per broken invariant
    """
    found = spec_violations(spec)
    if found:
        raise SpecValidationError(found)
    return spec


def node_violations(node: NodeSpec, location: str = "") -> List[Violation]:
    where = location or f"node {node.id}"
    found: List[Violation] = []
    kinds = [ladder.resource for ladder in node.ladders]
    for kind in RESOURCE_ORDER:
        if kinds.count(kind) != 1:
            found.append(
                Violation(
                    "BadNodeSpec",
                    f"{where}.ladders",
                    f"need exactly one ladder for {kind.value}",
                )
            )
    for ladder in node.ladders:
        if ladder.levels < 1 or not ladder.capacity > 0:
            found.append(
                Violation(
                    "BadNodeSpec",
                    f"{where}.ladders.{ladder.resource.value}",
                    "capacity must be > 0 and levels >= 1",
                )
            )
    if node.static_priority < 0:
        found.append(
            Violation("InvalidField", f"{where}.static_priority", "must be >= 0")
        )
    if node.supports_tt != (node.tt_config is not None):
        found.append(
            Violation(
                "BadNodeSpec",
                f"{where}.tt_config",
                "TimeTriggered class and tt_config must come together",
            )
        )
    cfg = node.tt_config
    if cfg is not None and not (
        cfg.slot_length > 0
        and cfg.hyperperiod > 0
        and cfg.hyperperiod % cfg.slot_length == 0
    ):
        found.append(
            Violation(
                "BadNodeSpec",
                f"{where}.tt_config",
                "hyperperiod must be a positive multiple of slot_length",
            )
        )
    return found


def claim_payload(claim: ResourceClaim) -> Dict[str, object]:
    return {
        "resource": claim.resource.value,
        "request": claim.request_levels,
        "limit": claim.limit_levels,
        "strictness": claim.strictness.value,
    }
