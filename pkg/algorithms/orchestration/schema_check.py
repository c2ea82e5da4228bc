"""
JSON schema checks.

Schemas live in the repository's schemas/ directory. Schema errors become
``Violation`` records located the same way as the loader's own checks:
``$.defaults.alpha``, ``containers[0].claims.Cache``.
"""

import json
import re
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

from jsonschema import Draft7Validator
from jsonschema.exceptions import ValidationError

from algorithms.orchestration.errors import Violation

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "schemas"

# top-level arrays whose items are located as name[i] rather than $.name[i]
_INDEXED = ("nodes", "containers", "events")
_REQUIRED = re.compile(r"^'(.+)' is a required property$")


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """
    Load and check a schema from schemas/.

    Raises:
        FileNotFoundError: the schema file is missing
    """
    path = SCHEMA_DIR / name
    try:
        with open(path, "r") as f:
            schema: Dict[str, Any] = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"Schema file not found: {path}\n"
            f"Please ensure schemas/{name} exists."
        )
    Draft7Validator.check_schema(schema)
    return schema


def error_path(error: ValidationError) -> List[Any]:
    """Instance path of ``error``, extended with the offending key if any."""
    path = list(error.absolute_path)
    if "propertyNames" in error.absolute_schema_path:
        path.append(error.instance)
    elif error.validator == "required":
        match = _REQUIRED.match(error.message)
        if match:
            path.append(match.group(1))
    return path


def format_location(path: Sequence[Any], root: str = "$") -> str:
    parts = list(path)
    location = root
    if (
        root == "$"
        and len(parts) >= 2
        and parts[0] in _INDEXED
        and isinstance(parts[1], int)
    ):
        location = f"{parts[0]}[{parts[1]}]"
        parts = parts[2:]
    for part in parts:
        location += f"[{part}]" if isinstance(part, int) else f".{part}"
    return location


def schema_violations(
    schema: Mapping[str, Any],
    instance: Any,
    root: str = "$",
    code_for: Optional[Callable[[List[Any]], str]] = None,
) -> List[Violation]:
    """
    Every schema error of ``instance``, sorted by location.

    Args:
        schema: Draft-07 schema
        instance: Decoded JSON value
        root: Location prefix of ``instance``
        code_for: Maps an error path to a violation code (default InvalidField)
    """
    found = set()
    for error in Draft7Validator(schema).iter_errors(instance):
        path = error_path(error)
        code = code_for(path) if code_for is not None else "InvalidField"
        found.add(Violation(code, format_location(path, root), error.message))
    return sorted(found, key=lambda v: (v.location, v.code, v.message))
