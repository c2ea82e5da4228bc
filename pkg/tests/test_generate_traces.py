"""
Tests for scripts/generate_traces.py

Tests cover:
- One trace file per scenario, named after the scenario
- Generated corpus scenarios appended to the batch
- Failed scenarios reported without stopping the batch
"""

import json

from conftest import load_document
from generate_traces import generate_all_traces, main

from algorithms.orchestration.trace_io import read_trace


class TestGenerateAllTraces:
    """Tests for generate_all_traces()."""

    def test_one_trace_per_scenario(self, tmp_path, capsys):
        """Test files are written under the scenario stem."""
        scenarios = tmp_path / "scenarios"
        scenarios.mkdir()
        for name in ("request_change", "tt_admission"):
            (scenarios / f"{name}.json").write_text(json.dumps(load_document(name)))
        out = tmp_path / "traces"

        rows = generate_all_traces(scenario_dir=scenarios, output_dir=str(out))

        assert [r["name"] for r in rows] == ["request_change", "tt_admission"]
        assert sorted(p.name for p in out.iterdir()) == [
            "request_change.jsonl",
            "tt_admission.jsonl",
        ]
        assert len(read_trace(out / "request_change.jsonl")) == rows[0]["events"]
        assert "GENERATION COMPLETE" in capsys.readouterr().out

    def test_corpus_added(self, tmp_path):
        """Test generated scenarios follow the shipped ones."""
        empty = tmp_path / "none"
        empty.mkdir()
        rows = generate_all_traces(
            scenario_dir=empty, output_dir=str(tmp_path / "t"), corpus_size=2
        )
        assert [r["name"] for r in rows] == ["corpus-1000", "corpus-1001"]
        assert all(r["violations"] == 0 for r in rows)

    def test_failure_does_not_stop_batch(self, tmp_path, capsys):
        """Test an invalid document is reported and skipped."""
        scenarios = tmp_path / "scenarios"
        scenarios.mkdir()
        (scenarios / "a_broken.json").write_text('{"schema": 2}')
        (scenarios / "b_ok.json").write_text(json.dumps(load_document("request_change")))

        rows = generate_all_traces(scenario_dir=scenarios, output_dir=str(tmp_path / "t"))

        assert [r["name"] for r in rows] == ["b_ok"]
        assert "Failed: 1 traces" in capsys.readouterr().out


def test_main_exit_status(tmp_path):
    """Test main() returns 0 when no run records a violation."""
    argv = ["--scenarios", str(tmp_path), "--out", str(tmp_path / "t"), "--corpus", "1"]
    assert main(argv) == 0
