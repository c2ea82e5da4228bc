"""
Error types shared by every orchestration module.

Each exception carries a stable ``code`` matching the name used in traces,
diagnostics and tests. Validation problems are collected as ``Violation``
records and only raised at the boundary, wrapped in a single exception.
"""

from dataclasses import dataclass
from typing import List, Sequence


class OrchestrationError(Exception):
    """Base class for all orchestration errors."""

    code = "OrchestrationError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class InvalidAmount(OrchestrationError):
    code = "InvalidAmount"


class MixedTickBatch(OrchestrationError):
    code = "MixedTickBatch"


class UnknownContainer(OrchestrationError):
    code = "UnknownContainer"


class NotAdaptive(OrchestrationError):
    code = "NotAdaptive"


class UnsupportedClass(OrchestrationError):
    code = "UnsupportedClass"


class CapacityExceeded(OrchestrationError):
    code = "CapacityExceeded"


class EmptyFeasibleSet(OrchestrationError):
    code = "EmptyFeasibleSet"


class NoFeasibleNode(OrchestrationError):
    code = "NoFeasibleNode"


class UtilizationExceeded(OrchestrationError):
    code = "UtilizationExceeded"


class NoFeasibleTable(OrchestrationError):
    code = "NoFeasibleTable"


class PeriodNotDividingHyperperiod(OrchestrationError):
    code = "PeriodNotDividingHyperperiod"


class TraceError(OrchestrationError):
    code = "TraceError"


class ParseError(OrchestrationError):
    """Scenario text could not be parsed; ``location`` is 'line L column C'."""

    code = "ParseError"

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True)
class Violation:
    """One broken invariant, located by a JSON-path-like string."""

    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.code}: {self.message}"


class SpecValidationError(OrchestrationError):
    code = "SpecValidationError"

    def __init__(self, violations: Sequence[Violation]):
        self.violations: List[Violation] = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ScenarioValidationError(SpecValidationError):
    code = "ValidationError"
