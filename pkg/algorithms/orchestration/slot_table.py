"""
Time-Triggered Slot Tables

Builds cyclic schedules for TimeTriggered containers over a node's fixed
hyperperiod. Jobs are assigned to slots of ``slot_length`` ticks in EDF
order; a table is accepted only if every job receives its full runtime
before its deadline.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from algorithms.orchestration.core_model import NodeSpec, TtConfig, TtParams
from algorithms.orchestration.errors import (
    NoFeasibleTable,
    PeriodNotDividingHyperperiod,
    UnsupportedClass,
    UtilizationExceeded,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlotTable:
    hyperperiod: int
    slot_length: int
    slots: Tuple[Tuple[int, str], ...]
    tasks: Tuple[Tuple[str, TtParams], ...]

    @property
    def container_ids(self) -> List[str]:
        return [cid for cid, _ in self.tasks]

    @property
    def utilization(self) -> Fraction:
        return sum(
            (Fraction(p.runtime, p.period) for _, p in self.tasks), Fraction(0)
        )

    def to_payload(self) -> Dict:
        return {
            "hyperperiod": self.hyperperiod,
            "slot_length": self.slot_length,
            "slots": [[start, cid] for start, cid in self.slots],
            "tasks": {
                cid: {"period": p.period, "runtime": p.runtime, "deadline": p.deadline}
                for cid, p in self.tasks
            },
        }


@dataclass
class _Job:
    cid: str
    release: int
    deadline: int
    remaining: int


def _jobs(
    tasks: Sequence[Tuple[str, TtParams]], hyperperiod: int, slot_length: int
) -> List[_Job]:
    jobs = []
    for cid, params in tasks:
        slots_needed = math.ceil(params.runtime / slot_length)
        for k in range(hyperperiod // params.period):
            release = k * params.period
            jobs.append(_Job(cid, release, release + params.deadline, slots_needed))
    return jobs


def build_slot_table(
    config: TtConfig, tasks: Sequence[Tuple[str, TtParams]]
) -> SlotTable:
    """
    Construct a slot table for ``tasks`` over one hyperperiod.

    Args:
        config: Node slot length and hyperperiod
        tasks: (container id, TT parameters) pairs

    Returns:
        SlotTable whose slots are sorted by start tick

    Raises:
        PeriodNotDividingHyperperiod: a period does not divide the hyperperiod
        UtilizationExceeded: total runtime/period above 1
        NoFeasibleTable: EDF assignment leaves some job short of its runtime
    """
    hyperperiod, slot_length = config.hyperperiod, config.slot_length
    for cid, params in tasks:
        if hyperperiod % params.period != 0:
            raise PeriodNotDividingHyperperiod(
                f"{cid}: period {params.period} does not divide {hyperperiod}"
            )
    utilization = sum(
        (Fraction(p.runtime, p.period) for _, p in tasks), Fraction(0)
    )
    if utilization > 1:
        raise UtilizationExceeded(f"utilization {float(utilization):.3f} > 1")

    jobs = _jobs(tasks, hyperperiod, slot_length)
    slots: List[Tuple[int, str]] = []
    for start in range(0, hyperperiod, slot_length):
        ready = [
            j
            for j in jobs
            if j.remaining > 0
            and j.release <= start
            and start + slot_length <= j.deadline
        ]
        if not ready:
            continue
        job = min(ready, key=lambda j: (j.deadline, j.cid, j.release))
        job.remaining -= 1
        slots.append((start, job.cid))

    short = [j for j in jobs if j.remaining > 0]
    if short:
        first = short[0]
        raise NoFeasibleTable(
            f"{first.cid} job released at {first.release} misses deadline "
            f"{first.deadline}"
        )
    return SlotTable(
        hyperperiod=hyperperiod,
        slot_length=slot_length,
        slots=tuple(slots),
        tasks=tuple(tasks),
    )


def admit_tt(
    node: NodeSpec,
    existing: Optional[SlotTable],
    container_id: str,
    params: TtParams,
) -> SlotTable:
    """
    Table for the node's current TT containers plus one newcomer.

    Raises:
        UnsupportedClass: node lacks the TimeTriggered class
        PeriodNotDividingHyperperiod, UtilizationExceeded, NoFeasibleTable
    """
    if not node.supports_tt or node.tt_config is None:
        raise UnsupportedClass(f"node {node.id} has no TimeTriggered class")
    tasks = [t for t in (existing.tasks if existing else ()) if t[0] != container_id]
    tasks.append((container_id, params))
    table = build_slot_table(node.tt_config, tasks)
    logger.debug(
        "node %s TT table for %d containers, %d slots",
        node.id,
        len(tasks),
        len(table.slots),
    )
    return table


def remove_tt_task(node: NodeSpec, existing: SlotTable, container_id: str) -> SlotTable:
    """Recompute ``existing`` without one container (possibly an empty table)."""
    assert node.tt_config is not None
    tasks = [t for t in existing.tasks if t[0] != container_id]
    return build_slot_table(node.tt_config, tasks)


def replay_slot_table(table: SlotTable) -> List[str]:
    """
    Check a table structurally by replaying one hyperperiod.

    Returns:
        Problems found (overlapping slots, out-of-range slots, jobs short of
        runtime before their deadline); empty for a valid table
    """
    problems: List[str] = []
    starts = sorted(start for start, _ in table.slots)
    for a, b in zip(starts, starts[1:]):
        if b - a < table.slot_length:
            problems.append(f"slots at {a} and {b} overlap")
    for start in starts:
        if start < 0 or start + table.slot_length > table.hyperperiod:
            problems.append(f"slot at {start} outside hyperperiod")

    for job in _jobs(table.tasks, table.hyperperiod, table.slot_length):
        served = sum(
            1
            for start, cid in table.slots
            if cid == job.cid
            and start >= job.release
            and start + table.slot_length <= job.deadline
        )
        if served < job.remaining:
            problems.append(
                f"{job.cid} job released at {job.release} got {served} of "
                f"{job.remaining} slots"
            )
    return problems
