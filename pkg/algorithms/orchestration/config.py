"""
Simulation Configuration Utility

Reads algorithms/orchestration/config.json, the single source of default
tuning parameters for monitors, local enforcement and the global manager.
Scenario documents override individual keys under "defaults".
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from algorithms.orchestration.errors import ScenarioValidationError
from algorithms.orchestration.schema_check import load_schema, schema_violations

CONFIG_FILE = Path(__file__).parent / "config.json"

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

# camelCase keys of config.json / scenario "defaults" -> dataclass fields
_KEY_MAP = {
    "alpha": "alpha",
    "hysteresisFraction": "hysteresis_fraction",
    "dwell": "dwell",
    "grace": "grace",
    "overloadThreshold": "overload_threshold",
    "overloadDwell": "overload_dwell",
    "stalenessWindow": "staleness_window",
    "reportLatency": "report_latency",
    "escalationRetry": "escalation_retry",
    "divergenceDwell": "divergence_dwell",
    "misconfigPolicy": "misconfig_policy",
    "antiAffinity": "anti_affinity",
    "criticalityCeiling": "criticality_ceiling",
    "policyWeights": "policy_weights",
}

_INT_FIELDS = {
    "dwell",
    "grace",
    "overload_threshold",
    "overload_dwell",
    "staleness_window",
    "report_latency",
    "escalation_retry",
    "divergence_dwell",
}
_FLOAT_FIELDS = {"alpha", "hysteresis_fraction", "criticality_ceiling"}


def defaults_schema() -> Dict[str, Any]:
    """Schema of a scenario's "defaults" object."""
    schema: Dict[str, Any] = load_schema("scenario_schema.json")["definitions"][
        "defaults"
    ]
    return schema


def _coerce(attr: str, value: Any) -> Any:
    # JSON integers may arrive as 3.0
    if value is None:
        return None
    if attr in _INT_FIELDS:
        return int(value)
    if attr in _FLOAT_FIELDS:
        return float(value)
    return value


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load default configuration from config.json.

    Args:
        config_path: Optional path to a config file. If None, uses the
            config.json shipped next to this module.

    Returns:
        Configuration dictionary (camelCase keys, see config.json)
    """
    config_file = CONFIG_FILE if config_path is None else Path(config_path)

    try:
        with open(config_file, "r") as f:
            config: Dict[str, Any] = json.load(f)
        return config
    except FileNotFoundError:
        raise FileNotFoundError(
            f"Configuration file not found: {config_file}\n"
            "Please ensure algorithms/orchestration/config.json exists."
        )
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in configuration file: {e}")


@dataclass(frozen=True)
class SimulationDefaults:
    """Resolved tuning parameters for one scenario run."""

    alpha: float = 0.5
    hysteresis_fraction: float = 0.05
    dwell: int = 3
    grace: int = 2
    overload_threshold: Optional[int] = None
    overload_dwell: int = 3
    staleness_window: int = 5
    report_latency: int = 1
    escalation_retry: int = 10
    divergence_dwell: int = 3
    misconfig_policy: str = "throttle"
    anti_affinity: str = "preferred"
    criticality_ceiling: Optional[float] = None
    policy_weights: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_mapping(
        cls, overrides: Optional[Mapping[str, Any]] = None
    ) -> "SimulationDefaults":
        """
        Merge scenario overrides on top of config.json.

        Policy weights merge key by key.

        Raises:
            ScenarioValidationError: an override is unknown, mistyped or
                out of range (locations under ``$.defaults``)
        """
        overrides = dict(overrides or {})
        found = schema_violations(defaults_schema(), overrides, root="$.defaults")
        if found:
            raise ScenarioValidationError(found)

        base = load_config()
        merged: Dict[str, Any] = {}
        for key, attr in _KEY_MAP.items():
            if key in base:
                merged[attr] = _coerce(attr, base[key])
        weights = {k: float(v) for k, v in base.get("policyWeights", {}).items()}
        for key, value in overrides.items():
            attr = _KEY_MAP[key]
            if attr == "policy_weights":
                weights.update({k: float(v) for k, v in value.items()})
            else:
                merged[attr] = _coerce(attr, value)
        merged["policy_weights"] = weights
        return cls(**merged)

    def to_document(self) -> Dict[str, Any]:
        """Echo the resolved defaults back in config.json key style."""
        values = asdict(self)
        return {key: values[attr] for key, attr in _KEY_MAP.items()}


def default_ladders() -> Dict[str, Dict[str, Any]]:
    """Ladders used for any ResourceKind a node document leaves out."""
    ladders: Dict[str, Dict[str, Any]] = load_config()["defaultLadders"]
    return ladders


def configure_logging(level_name: Optional[str] = None) -> int:
    """
    Configure the package logger from LOG_LEVEL.

    Args:
        level_name: One of error/warn/info/debug; defaults to $LOG_LEVEL,
            then "warn". Unknown names fall back to "warn".

    Returns:
        The numeric logging level applied
    """
    name = (level_name or os.getenv("LOG_LEVEL", "warn")).strip().lower()
    level = LOG_LEVELS.get(name, logging.WARNING)

    logger = logging.getLogger("algorithms.orchestration")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        logger.addHandler(handler)
    logger.setLevel(level)
    return level
