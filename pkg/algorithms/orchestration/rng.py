"""
Seeded random streams.

Every consumer of randomness derives its own counter-based stream from the
scenario seed and a path of identifiers (container id, resource, ...), so
adding a subject never perturbs the draws of another.
"""

import hashlib
from typing import Any

import numpy as np


def stream_key(seed: int, *path: Any) -> int:
    """128-bit Philox key derived from ``seed`` and ``path``."""
    combined = "/".join([str(seed)] + [str(p) for p in path])
    digest = hashlib.sha256(combined.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


def for_path(seed: int, *path: Any) -> np.random.Generator:
    """
    Independent generator for one subject.

    Args:
        seed: Scenario seed
        *path: Identifiers naming the subject, e.g. ("demand", "c1", "Cache")

    Returns:
        numpy Generator over a Philox bit generator keyed by (seed, path)
    """
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))
