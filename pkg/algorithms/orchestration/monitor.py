"""
Band Monitor - Filtered, Hysteresis-Stable Usage Bands

Turns raw per-task usage samples into smoothed band states per container
and resource, and tracks the health of monitored subjects.

Pipeline per (container, resource) and tick:
    samples -> aggregate per container -> EWMA filter -> band classifier
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from algorithms.orchestration.core_model import BandLadder, ResourceKind, quantize
from algorithms.orchestration.errors import InvalidAmount, MixedTickBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterState:
    """Exponentially weighted moving average of one usage stream."""

    alpha: float
    smoothed: Optional[float] = None

    @property
    def initialized(self) -> bool:
        return self.smoothed is not None


@dataclass(frozen=True)
class BandState:
    current_band: int = 0
    candidate_band: int = 0
    dwell: int = 0
    hysteresis: float = 0.0
    dwell_required: int = 1


@dataclass(frozen=True)
class UsageSample:
    tick: int
    container_id: str
    task_id: str
    resource: ResourceKind
    value: float


class HealthStatus(str, Enum):
    HEALTHY = "Healthy"
    STALE = "Stale"
    FAILED = "Failed"


@dataclass(frozen=True)
class HealthRecord:
    subject: str
    node_id: str
    last_seen_tick: int
    status: HealthStatus = HealthStatus.HEALTHY


def ewma_update(state: FilterState, sample_value: float) -> FilterState:
    """
    Fold one sample into the filter.

    The first sample initializes the average to the sample itself.
    """
    if sample_value < 0:
        raise InvalidAmount(f"negative sample {sample_value}")
    if state.smoothed is None:
        return replace(state, smoothed=float(sample_value))
    smoothed = state.alpha * sample_value + (1.0 - state.alpha) * state.smoothed
    return replace(state, smoothed=smoothed)


def _clears_margin(
    smoothed: float, target: int, current: int, ladder: BandLadder, h: float
) -> bool:
    # Margin is measured from the target band's edge facing the current band.
    if target > current:
        return smoothed >= ladder.boundary(target) + h
    return smoothed <= ladder.boundary(target + 1) - h


def classify_band(
    ladder: BandLadder, filter_state: FilterState, band: BandState
) -> BandState:
    """
    Advance the band state machine by one classification.

    A transition to a new band requires the smoothed value to sit at least
    ``band.hysteresis`` inside the target band for ``band.dwell_required``
    consecutive classifications. Multi-level jumps are allowed.

    Args:
        ladder: Ladder of the monitored resource
        filter_state: Initialized filter holding the smoothed value
        band: Current band state

    Returns:
        Next band state
    """
    if filter_state.smoothed is None:
        raise ValueError("classify_band needs an initialized filter")
    smoothed = filter_state.smoothed
    target = quantize(smoothed, ladder)
    current = band.current_band

    if target == current or not _clears_margin(
        smoothed, target, current, ladder, band.hysteresis
    ):
        return replace(band, candidate_band=current, dwell=0)

    dwell = band.dwell + 1 if band.candidate_band == target else 1
    if dwell >= band.dwell_required:
        logger.debug(
            "%s band %d -> %d (smoothed=%.3f)",
            ladder.resource.value,
            current,
            target,
            smoothed,
        )
        return replace(band, current_band=target, candidate_band=target, dwell=0)
    return replace(band, candidate_band=target, dwell=dwell)


def naive_bands(values: Sequence[float], ladder: BandLadder) -> List[int]:
    """Quantize every raw sample independently (no filter, no hysteresis)."""
    return [quantize(v, ladder) for v in values]


def filtered_bands(
    values: Sequence[float],
    ladder: BandLadder,
    alpha: float,
    hysteresis: float,
    dwell_required: int,
    start_band: int = 0,
) -> List[int]:
    """Replay a raw stream through ewma_update + classify_band."""
    filt = FilterState(alpha=alpha)
    band = BandState(
        current_band=start_band,
        candidate_band=start_band,
        hysteresis=hysteresis,
        dwell_required=dwell_required,
    )
    out: List[int] = []
    for value in values:
        filt = ewma_update(filt, value)
        band = classify_band(ladder, filt, band)
        out.append(band.current_band)
    return out


def count_transitions(bands: Sequence[int], start_band: int = 0) -> int:
    previous = start_band
    changes = 0
    for b in bands:
        if b != previous:
            changes += 1
        previous = b
    return changes


def aggregate_container_usage(
    samples: Iterable[UsageSample],
    containers: Iterable[str] = (),
    resources: Iterable[ResourceKind] = (),
) -> Dict[Tuple[str, ResourceKind], float]:
    """
    Sum task samples of one tick into per-(container, resource) totals.

    Args:
        samples: Samples that all share one tick
        containers: Containers to report even without samples (total 0)
        resources: Resources to zero-fill for those containers

    Returns:
        Mapping (container_id, resource) -> total
    """
    parts: Dict[Tuple[str, ResourceKind], List[float]] = defaultdict(list)
    tick: Optional[int] = None
    for sample in samples:
        if tick is None:
            tick = sample.tick
        elif sample.tick != tick:
            raise MixedTickBatch(f"samples from ticks {tick} and {sample.tick}")
        parts[(sample.container_id, sample.resource)].append(sample.value)

    totals = {key: math.fsum(values) for key, values in parts.items()}
    for cid in containers:
        for resource in resources:
            totals.setdefault((cid, resource), 0.0)
    return totals


def update_health(
    records: Mapping[str, HealthRecord],
    tick: int,
    observed: Iterable[str] = (),
    failed_nodes: Iterable[str] = (),
    failed_subjects: Iterable[str] = (),
    staleness_window: int = 5,
) -> Dict[str, HealthRecord]:
    """
    Refresh health records for one tick.

    Observed subjects become Healthy; subjects silent for more than
    ``staleness_window`` ticks become Stale; fault events force Failed, and
    Failed is sticky.
    """
    seen = set(observed)
    dead_nodes = set(failed_nodes)
    dead_subjects = set(failed_subjects)
    updated: Dict[str, HealthRecord] = {}
    for subject, record in records.items():
        if (
            record.status is HealthStatus.FAILED
            or record.node_id in dead_nodes
            or subject in dead_subjects
        ):
            updated[subject] = replace(record, status=HealthStatus.FAILED)
        elif subject in seen:
            updated[subject] = replace(
                record, last_seen_tick=tick, status=HealthStatus.HEALTHY
            )
        elif tick - record.last_seen_tick > staleness_window:
            updated[subject] = replace(record, status=HealthStatus.STALE)
        else:
            updated[subject] = record
    return updated
