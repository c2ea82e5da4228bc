"""
Unit tests for algorithms/orchestration/trace_io.py

Tests cover:
- Canonical line layout (key order, sorted payload keys)
- Reading back traces produced by real runs
- Atomic writes
- TraceError on malformed lines
"""

import json
from pathlib import Path

import pytest
from conftest import load_document

from algorithms.orchestration.errors import TraceError
from algorithms.orchestration.metrics import compute_metrics
from algorithms.orchestration.scenario import load_scenario
from algorithms.orchestration.sim_engine import Event, run
from algorithms.orchestration.trace_io import (
    RECORD_KEYS,
    decode_event,
    decode_trace,
    encode_event,
    encode_trace,
    read_trace,
    write_trace,
)


class TestEncoding:
    """Tests for encode_event()."""

    def test_record_key_order(self):
        """Test tick, source, kind, payload come in that order."""
        line = encode_event(Event(4, "n1", "report", {"b": 1, "a": 2}))
        assert list(json.loads(line)) == ["tick", "source", "kind", "payload"]

    def test_payload_keys_sorted(self):
        """Test nested payload keys are sorted."""
        line = encode_event(Event(0, "sim", "x", {"z": {"b": 1, "a": 0}, "m": []}))
        assert line == '{"tick":0,"source":"sim","kind":"x","payload":{"m":[],"z":{"a":0,"b":1}}}'

    def test_insertion_order_irrelevant(self):
        """Test equal payloads built in different orders encode identically."""
        a = Event(1, "n1", "bands", {"x": 1, "y": 2})
        b = Event(1, "n1", "bands", {"y": 2, "x": 1})
        assert encode_event(a) == encode_event(b)


class TestRealTraces:
    """Write and read traces of shipped scenarios."""

    def test_read_back_preserves_metrics(self, tmp_path):
        """Test a written trace summarizes like the in-memory one."""
        trace = run(load_scenario(load_document("node_failure")))
        path = write_trace(trace, tmp_path / "out" / "trace.jsonl")
        loaded = read_trace(path)
        assert len(loaded) == len(trace)
        assert compute_metrics(loaded) == compute_metrics(trace)
        assert encode_trace(loaded.events) == path.read_text(encoding="utf-8")

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        """Test only the destination remains after writing."""
        trace = run(load_scenario(load_document("request_change")))
        write_trace(trace, tmp_path / "t.jsonl")
        write_trace(trace, tmp_path / "t.jsonl")
        assert [p.name for p in tmp_path.iterdir()] == ["t.jsonl"]

    def test_blank_lines_skipped(self):
        """Test blank lines between records are ignored."""
        text = encode_event(Event(0, "sim", "tick", {})) + "\n\n"
        assert len(decode_trace(text)) == 1


class TestDecodeErrors:
    """Tests for decode_event() failures."""

    def test_not_json(self):
        """Test garbage text names its line."""
        with pytest.raises(TraceError, match="line 7"):
            decode_event("{oops", 7)

    def test_wrong_keys(self):
        """Test records must have exactly the four keys in order."""
        with pytest.raises(TraceError):
            decode_event('{"kind":"x","tick":0,"source":"s","payload":{}}')

    def test_wrong_types(self):
        """Test tick must be an integer."""
        with pytest.raises(TraceError):
            decode_event('{"tick":"0","source":"s","kind":"x","payload":{}}')

    def test_bad_line_in_file(self, tmp_path):
        """Test read_trace reports malformed content."""
        path = tmp_path / "bad.jsonl"
        path.write_text(encode_event(Event(0, "sim", "tick", {})) + "\nnot json\n")
        with pytest.raises(TraceError, match="line 2"):
            read_trace(path)


def test_record_schema_matches_encoder():
    """Test the published record schema lists the encoder's keys."""
    schema_path = Path(__file__).parent.parent / "schemas" / "trace_record_schema.json"
    schema = json.loads(schema_path.read_text())
    assert schema["required"] == list(RECORD_KEYS)
    assert schema["additionalProperties"] is False
