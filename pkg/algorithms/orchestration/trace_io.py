"""
Trace serialization.

One JSON object per line with keys in the fixed order tick, source, kind,
payload; payload keys are sorted at every depth so equal traces serialize
to identical bytes. Files are written to a temporary sibling and renamed
into place.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Union

from algorithms.orchestration.errors import TraceError
from algorithms.orchestration.sim_engine import Event, Trace

RECORD_KEYS = ("tick", "source", "kind", "payload")


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _canonical(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def encode_event(event: Event) -> str:
    record = {
        "tick": event.tick,
        "source": event.source,
        "kind": event.kind,
        "payload": _canonical(event.payload),
    }
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def decode_event(line: str, line_number: int = 0) -> Event:
    """
    Parse one trace line.

    Raises:
        TraceError: the line is not a well-formed record
    """
    where = f"line {line_number}: " if line_number else ""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"{where}{e.msg}")
    if not isinstance(record, dict) or tuple(record) != RECORD_KEYS:
        raise TraceError(f"{where}expected keys {', '.join(RECORD_KEYS)}")
    tick, source, kind, payload = (record[k] for k in RECORD_KEYS)
    if (
        not isinstance(tick, int)
        or isinstance(tick, bool)
        or not isinstance(source, str)
        or not isinstance(kind, str)
        or not isinstance(payload, dict)
    ):
        raise TraceError(f"{where}field of the wrong type")
    return Event(tick, source, kind, payload)


def encode_trace(events: Iterable[Event]) -> str:
    return "".join(encode_event(e) + "\n" for e in events)


def decode_trace(text: str) -> Trace:
    events: List[Event] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            events.append(decode_event(line, number))
    return Trace(events)


def write_trace(trace: Trace, output_path: Union[str, Path]) -> Path:
    """
    Atomically write ``trace`` as line-delimited JSON.

    Args:
        trace: Trace to save
        output_path: Destination file; parent directories are created

    Returns:
        The destination path
    """
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(encode_trace(trace.events))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_trace(input_path: Union[str, Path]) -> Trace:
    """
    Raises:
        OSError: unreadable file
        TraceError: malformed content
    """
    return decode_trace(Path(input_path).read_text(encoding="utf-8"))
