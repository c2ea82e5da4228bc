"""
Demand models driving simulated containers.

Each model yields, per tick, the raw demand of a container on each claimed
resource in native units. RandomWalk paths are drawn once from a stream
keyed by (seed, container id, resource), so a path is a pure function of
those three and the tick.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from algorithms.orchestration import rng
from algorithms.orchestration.core_model import ResourceKind
from algorithms.orchestration.errors import Violation

Values = Dict[ResourceKind, float]


class DemandKind(str, Enum):
    CONSTANT = "Constant"
    STEP = "Step"
    PERIODIC = "Periodic"
    RANDOM_WALK = "RandomWalk"


@dataclass(frozen=True)
class ConstantDemand:
    values: Values

    kind = DemandKind.CONSTANT

    def value(self, tick: int) -> Values:
        return dict(self.values)


@dataclass(frozen=True)
class StepDemand:
    at: int
    before: Values
    after: Values

    kind = DemandKind.STEP

    def value(self, tick: int) -> Values:
        return dict(self.after if tick >= self.at else self.before)


@dataclass(frozen=True)
class PeriodicDemand:
    """``peak`` for the first ``duty`` fraction of each period, else ``base``."""

    base: Values
    peak: Values
    period: int
    duty: float = 0.5
    phase: int = 0

    kind = DemandKind.PERIODIC

    def value(self, tick: int) -> Values:
        position = (tick + self.phase) % self.period
        on = position < self.duty * self.period
        return dict(self.peak if on else self.base)


@dataclass(frozen=True)
class RandomWalkDemand:
    """Bounded walk in [0, high] with uniform steps in [-step, step]."""

    start: Values
    step: Values
    high: Values
    seed: int
    container_id: str
    horizon: int
    paths: Dict[ResourceKind, np.ndarray] = field(
        init=False, repr=False, compare=False
    )

    kind = DemandKind.RANDOM_WALK

    def __post_init__(self) -> None:
        paths = {}
        for resource, start in self.start.items():
            gen = rng.for_path(self.seed, "demand", self.container_id, resource.value)
            steps = gen.uniform(-self.step[resource], self.step[resource], self.horizon)
            path = np.empty(self.horizon, dtype=np.float64)
            level = float(start)
            for t in range(self.horizon):
                path[t] = level
                level = float(np.clip(level + steps[t], 0.0, self.high[resource]))
            paths[resource] = path
        object.__setattr__(self, "paths", paths)

    def value(self, tick: int) -> Values:
        index = min(max(tick, 0), self.horizon - 1)
        return {r: float(p[index]) for r, p in self.paths.items()}


DemandModel = Union[ConstantDemand, StepDemand, PeriodicDemand, RandomWalkDemand]


def _values(
    doc: Any, where: str, found: List[Violation]
) -> Optional[Values]:
    if not isinstance(doc, Mapping):
        found.append(Violation("InvalidField", where, "expected a resource map"))
        return None
    values: Values = {}
    for name, amount in doc.items():
        try:
            resource = ResourceKind(name)
        except ValueError:
            found.append(Violation("InvalidField", f"{where}.{name}", "unknown resource"))
            continue
        if (
            isinstance(amount, bool)
            or not isinstance(amount, (int, float))
            or amount < 0
        ):
            found.append(
                Violation("InvalidField", f"{where}.{name}", "must be a number >= 0")
            )
            continue
        values[resource] = float(amount)
    return values


def _non_negative_int(
    doc: Mapping, key: str, where: str, found: List[Violation], default: Any = None
) -> Optional[int]:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        found.append(Violation("InvalidField", f"{where}.{key}", "must be an int >= 0"))
        return None
    return value


def demand_from_document(
    doc: Any,
    where: str,
    seed: int,
    container_id: str,
    horizon: int,
) -> Tuple[Optional[DemandModel], List[Violation]]:
    """
    Build a demand model from its scenario document.

    Returns:
        (model, violations); model is None whenever violations is non-empty
    """
    found: List[Violation] = []
    if not isinstance(doc, Mapping):
        return None, [Violation("InvalidField", where, "expected an object")]
    try:
        kind = DemandKind(doc.get("kind"))
    except ValueError:
        return None, [
            Violation("InvalidField", f"{where}.kind", f"unknown kind {doc.get('kind')!r}")
        ]

    model: Optional[DemandModel] = None
    if kind is DemandKind.CONSTANT:
        values = _values(doc.get("values"), f"{where}.values", found)
        if values is not None:
            model = ConstantDemand(values)
    elif kind is DemandKind.STEP:
        at = _non_negative_int(doc, "at", where, found)
        before = _values(doc.get("before"), f"{where}.before", found)
        after = _values(doc.get("after"), f"{where}.after", found)
        if at is not None and before is not None and after is not None:
            model = StepDemand(at, before, after)
    elif kind is DemandKind.PERIODIC:
        base = _values(doc.get("base"), f"{where}.base", found)
        peak = _values(doc.get("peak"), f"{where}.peak", found)
        period = _non_negative_int(doc, "period", where, found)
        phase = _non_negative_int(doc, "phase", where, found, default=0)
        duty = doc.get("duty", 0.5)
        if isinstance(duty, bool) or not isinstance(duty, (int, float)) or not (
            0.0 <= duty <= 1.0
        ):
            found.append(Violation("InvalidField", f"{where}.duty", "must be in [0, 1]"))
        if period == 0:
            found.append(Violation("InvalidField", f"{where}.period", "must be > 0"))
        if not found and base is not None and peak is not None and period:
            model = PeriodicDemand(base, peak, period, float(duty), phase or 0)
    else:
        start = _values(doc.get("start"), f"{where}.start", found)
        step = _values(doc.get("step"), f"{where}.step", found)
        high = _values(doc.get("high"), f"{where}.high", found)
        if start is not None and step is not None and high is not None:
            if not (set(start) == set(step) == set(high)):
                found.append(
                    Violation(
                        "InvalidField",
                        where,
                        "start, step and high must name the same resources",
                    )
                )
            elif not found:
                model = RandomWalkDemand(
                    start, step, high, seed, container_id, max(horizon, 1)
                )
    if found:
        return None, found
    return model, found


def demand_resources(model: DemandModel) -> List[ResourceKind]:
    """Resources a model produces values for at some tick."""
    if isinstance(model, StepDemand):
        names = set(model.before) | set(model.after)
    elif isinstance(model, PeriodicDemand):
        names = set(model.base) | set(model.peak)
    else:
        names = set(model.value(0))
    return sorted(names, key=lambda r: r.value)
