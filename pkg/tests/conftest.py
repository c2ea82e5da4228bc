"""
Shared pytest fixtures for ShareLens tests.
"""

import copy
import json
import logging
import os
import sys
from pathlib import Path

import pytest

# Add project root and scripts directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "scripts"))

from algorithms.orchestration.config import SimulationDefaults  # noqa: E402
from algorithms.orchestration.core_model import (  # noqa: E402
    RESOURCE_ORDER,
    BandLadder,
    ContainerSpec,
    NodeSpec,
    ResourceClaim,
    ResourceKind,
    SchedClass,
    Strictness,
    TtConfig,
)

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"

MB = ResourceKind.MEMORY_BANDWIDTH

DEFAULT_LEVELS = {
    ResourceKind.CPU_TIME: (100.0, 4),
    ResourceKind.MEMORY_SPACE: (4096.0, 8),
    ResourceKind.MEMORY_BANDWIDTH: (1000.0, 10),
    ResourceKind.CACHE: (16.0, 8),
    ResourceKind.INTERCONNECT: (400.0, 4),
}


def make_node(node_id="n1", static_priority=0.0, tt=None, **levels):
    """NodeSpec with all five ladders; keyword args override MB/CPU levels."""
    ladders = []
    for resource in RESOURCE_ORDER:
        capacity, count = DEFAULT_LEVELS[resource]
        if resource is MB and "mb_levels" in levels:
            count = levels["mb_levels"]
            capacity = 100.0 * count
        if resource is ResourceKind.CPU_TIME and "cpu_levels" in levels:
            count = levels["cpu_levels"]
            capacity = 25.0 * count
        ladders.append(BandLadder(resource, capacity, count))
    classes = {SchedClass.GENERAL}
    if tt is not None:
        classes.add(SchedClass.TIME_TRIGGERED)
    return NodeSpec(
        id=node_id,
        ladders=tuple(ladders),
        static_priority=static_priority,
        sched_classes=frozenset(classes),
        tt_config=tt,
    )


def mb_claim(request, limit=None, strict=False):
    return ResourceClaim(
        MB,
        request,
        request if limit is None else limit,
        Strictness.STRICT if strict else Strictness.LOOSE,
    )


def make_container(cid, *claims, **kwargs):
    return ContainerSpec(id=cid, claims=tuple(claims), **kwargs)


def load_document(name):
    """Decoded copy of a shipped scenario document."""
    with open(SCENARIO_DIR / f"{name}.json") as f:
        return json.load(f)


@pytest.fixture
def mb_ladder():
    """Memory bandwidth ladder: 1000 units in 10 levels of 100."""
    return BandLadder(MB, 1000.0, 10)


@pytest.fixture
def small_ladder():
    """Interconnect ladder: 400 units in 4 levels."""
    return BandLadder(ResourceKind.INTERCONNECT, 400.0, 4)


@pytest.fixture
def node():
    return make_node("n1")


@pytest.fixture
def tt_node():
    """Node offering the TimeTriggered class with a 12-tick hyperperiod."""
    return make_node("tt", tt=TtConfig(slot_length=1, hyperperiod=12))


@pytest.fixture
def defaults():
    """Shipped defaults (config.json)."""
    return SimulationDefaults.from_mapping()


@pytest.fixture
def minimal_document():
    """Smallest valid scenario: one node, one container arriving at tick 0."""
    return {
        "schema": 1,
        "seed": 1,
        "horizon": 20,
        "nodes": [{"id": "n1"}],
        "containers": [
            {
                "id": "c1",
                "claims": {"MemoryBandwidth": {"request": 2, "limit": 4}},
                "demand": {"kind": "Constant", "values": {"MemoryBandwidth": 150}},
            }
        ],
    }


@pytest.fixture
def scenario_document():
    """Factory returning a fresh copy of a shipped scenario document."""

    def _load(name):
        return copy.deepcopy(load_document(name))

    return _load


@pytest.fixture(autouse=True)
def reset_package_logger():
    """Drop handlers the CLI attaches so they never outlive a captured stream."""
    yield
    logger = logging.getLogger("algorithms.orchestration")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
