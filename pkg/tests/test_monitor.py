"""
Unit tests for algorithms/orchestration/monitor.py

Tests cover:
- ewma_update() initialization, smoothing and geometric convergence
- classify_band() hysteresis margin, dwell rule and step settling time
- aggregate_container_usage() per-task summing
- update_health() staleness and sticky failure
- Hysteresis effectiveness against naive per-sample classification
"""

import numpy as np
import pytest
from conftest import MB
from hypothesis import given, settings
from hypothesis import strategies as st

from algorithms.orchestration.core_model import BandLadder, ResourceKind
from algorithms.orchestration.errors import InvalidAmount, MixedTickBatch
from algorithms.orchestration.monitor import (
    BandState,
    FilterState,
    HealthRecord,
    HealthStatus,
    UsageSample,
    aggregate_container_usage,
    classify_band,
    count_transitions,
    ewma_update,
    filtered_bands,
    naive_bands,
    update_health,
)


class TestEwma:
    """Tests for ewma_update()."""

    def test_first_sample_initializes(self):
        """Test the first sample becomes the smoothed value."""
        state = ewma_update(FilterState(alpha=0.3), 42.0)
        assert state.initialized
        assert state.smoothed == 42.0

    def test_uninitialized_before_sample(self):
        """Test a fresh filter has no smoothed value."""
        assert not FilterState(alpha=0.5).initialized

    def test_smoothing(self):
        """Test s' = a * x + (1 - a) * s."""
        state = ewma_update(FilterState(alpha=0.25, smoothed=100.0), 200.0)
        assert state.smoothed == pytest.approx(125.0)

    def test_alpha_one_tracks_input(self):
        """Test alpha = 1 reproduces the raw stream."""
        state = FilterState(alpha=1.0)
        for value in (5.0, 80.0, 3.0):
            state = ewma_update(state, value)
            assert state.smoothed == value

    def test_negative_sample_rejected(self):
        """Test negative samples raise InvalidAmount."""
        with pytest.raises(InvalidAmount):
            ewma_update(FilterState(alpha=0.5), -1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        alpha=st.floats(0.01, 1.0),
        start=st.floats(0, 2000),
        level=st.floats(0, 2000),
        k=st.integers(0, 60),
    )
    def test_geometric_convergence(self, alpha, start, level, k):
        """Test |s_k - c| <= (1 - a)^k * |s_0 - c| under a constant input c."""
        state = FilterState(alpha=alpha, smoothed=start)
        for _ in range(k):
            state = ewma_update(state, level)
        slack = 1e-9 * (1.0 + start + level) * (k + 1)
        assert abs(state.smoothed - level) <= (1.0 - alpha) ** k * abs(start - level) + slack


class TestClassifyBand:
    """Tests for classify_band()."""

    def _band(self, current=0, h=5.0, n=3):
        return BandState(
            current_band=current,
            candidate_band=current,
            hysteresis=h,
            dwell_required=n,
        )

    def test_requires_dwell(self, mb_ladder):
        """Test a transition needs N consecutive clearing classifications."""
        band = self._band(n=3)
        filt = FilterState(alpha=1.0, smoothed=350.0)
        band = classify_band(mb_ladder, filt, band)
        band = classify_band(mb_ladder, filt, band)
        assert band.current_band == 0
        assert band.candidate_band == 3 and band.dwell == 2
        band = classify_band(mb_ladder, filt, band)
        assert band.current_band == 3
        assert band.dwell == 0

    def test_margin_blocks_upward_move(self, mb_ladder):
        """Test a value inside the margin above a boundary does not move up."""
        band = self._band(current=2, n=1)
        band = classify_band(mb_ladder, FilterState(1.0, 303.0), band)
        assert band.current_band == 2

    def test_margin_blocks_downward_move(self, mb_ladder):
        """Test a value inside the margin below a boundary does not move down."""
        band = self._band(current=3, n=1)
        band = classify_band(mb_ladder, FilterState(1.0, 297.0), band)
        assert band.current_band == 3

    def test_multi_level_jump(self, mb_ladder):
        """Test a jump across several levels in one transition."""
        band = self._band(current=1, n=1)
        band = classify_band(mb_ladder, FilterState(1.0, 850.0), band)
        assert band.current_band == 8

    def test_non_clearing_sample_resets_dwell(self, mb_ladder):
        """Test dwell restarts after a classification inside the margin."""
        band = self._band(n=2)
        band = classify_band(mb_ladder, FilterState(1.0, 350.0), band)
        band = classify_band(mb_ladder, FilterState(1.0, 302.0), band)
        assert band.dwell == 0
        band = classify_band(mb_ladder, FilterState(1.0, 350.0), band)
        assert band.current_band == 0

    def test_uninitialized_filter_rejected(self, mb_ladder):
        """Test classification needs a smoothed value."""
        with pytest.raises(ValueError):
            classify_band(mb_ladder, FilterState(alpha=0.5), self._band())

    @settings(max_examples=100, deadline=None)
    @given(values=st.lists(st.floats(0, 1200, allow_nan=False), min_size=1, max_size=40))
    def test_band_stays_in_range(self, values):
        """Test 0 <= current_band < L for any stream."""
        ladder = BandLadder(MB, 1000.0, 10)
        bands = filtered_bands(values, ladder, 0.5, 5.0, 3)
        assert all(0 <= b < 10 for b in bands)

    @settings(max_examples=200, deadline=None)
    @given(
        alpha=st.floats(0.05, 1.0),
        h=st.floats(0.0, 45.0),
        n=st.integers(1, 5),
        before=st.integers(0, 9),
        after=st.integers(0, 9),
    )
    def test_step_settles_within_bound(self, alpha, h, n, before, after):
        """Test a sustained step reaches its band within the filter lag plus N."""
        ladder = BandLadder(MB, 1000.0, 10)
        start, level = before * 100.0 + 50.0, after * 100.0 + 50.0
        # ticks until the smoothed value sits inside the target band's margin
        lag, error, margin = 0, abs(start - level), 50.0 - h - 1.0
        while error > margin:
            error *= 1.0 - alpha
            lag += 1

        state = FilterState(alpha=alpha, smoothed=start)
        band = self._band(current=before, h=h, n=n)
        for _ in range(lag + n):
            state = ewma_update(state, level)
            band = classify_band(ladder, state, band)
        assert band.current_band == after
        for _ in range(5):
            state = ewma_update(state, level)
            band = classify_band(ladder, state, band)
            assert band.current_band == after


class TestAggregation:
    """Tests for aggregate_container_usage()."""

    def test_sum_over_tasks(self):
        """Test container usage is the sum of its task samples."""
        samples = [
            UsageSample(4, "c1", "t1", MB, 100.0),
            UsageSample(4, "c1", "t2", MB, 50.5),
            UsageSample(4, "c2", "t1", MB, 10.0),
        ]
        totals = aggregate_container_usage(samples)
        assert totals[("c1", MB)] == pytest.approx(150.5)
        assert totals[("c2", MB)] == 10.0

    def test_zero_fill(self):
        """Test containers without samples report zero."""
        totals = aggregate_container_usage([], containers=["c1"], resources=[MB])
        assert totals == {("c1", MB): 0.0}

    def test_mixed_ticks_rejected(self):
        """Test samples from different ticks raise MixedTickBatch."""
        samples = [
            UsageSample(1, "c1", "t1", MB, 1.0),
            UsageSample(2, "c1", "t1", MB, 1.0),
        ]
        with pytest.raises(MixedTickBatch):
            aggregate_container_usage(samples)


class TestHealth:
    """Tests for update_health()."""

    def _records(self):
        return {"c1": HealthRecord("c1", "n1", 0), "c2": HealthRecord("c2", "n2", 0)}

    def test_observed_is_healthy(self):
        """Test an observed subject refreshes last_seen_tick."""
        records = update_health(self._records(), 3, observed={"c1"})
        assert records["c1"].last_seen_tick == 3
        assert records["c1"].status is HealthStatus.HEALTHY

    def test_silence_beyond_window_is_stale(self):
        """Test Stale iff now - last_seen exceeds the window."""
        records = update_health(self._records(), 5, staleness_window=5)
        assert records["c1"].status is HealthStatus.HEALTHY
        records = update_health(records, 6, staleness_window=5)
        assert records["c1"].status is HealthStatus.STALE

    def test_failure_is_sticky(self):
        """Test Failed survives later observations."""
        records = update_health(self._records(), 1, failed_nodes={"n2"})
        assert records["c2"].status is HealthStatus.FAILED
        records = update_health(records, 2, observed={"c2"})
        assert records["c2"].status is HealthStatus.FAILED

    def test_failed_subject(self):
        """Test an explicit subject fault."""
        records = update_health(self._records(), 1, failed_subjects={"c1"})
        assert records["c1"].status is HealthStatus.FAILED
        assert records["c2"].status is HealthStatus.HEALTHY


class TestHysteresisEffectiveness:
    """Filtered versus naive classification on noisy streams."""

    LADDER = BandLadder(ResourceKind.MEMORY_BANDWIDTH, 1000.0, 10)
    H = 5.0

    def test_noise_around_boundary_never_crosses(self):
        """Test streams within +-h of a boundary: filtered 0, naive >= 1."""
        gen = np.random.default_rng(2024)
        for _ in range(100):
            boundary = int(gen.integers(1, 10))
            edge = boundary * self.LADDER.level_width
            noise = gen.uniform(-0.9 * self.H, 0.9 * self.H, 60)
            values = list(edge + noise)
            values[0] = edge + self.H / 2
            start = boundary - 1
            filtered = filtered_bands(values, self.LADDER, 0.5, self.H, 3, start)
            naive = naive_bands(values, self.LADDER)
            assert count_transitions(filtered, start) == 0
            assert count_transitions(naive, start) >= 1

    def test_filtered_never_chattier_than_naive(self):
        """Test filtered transitions <= naive transitions on noisy streams."""
        gen = np.random.default_rng(7)
        for _ in range(100):
            base = gen.uniform(100, 900)
            values = np.clip(base + gen.normal(0, 50, 200), 0, None)
            filtered = filtered_bands(list(values), self.LADDER, 0.5, self.H, 3)
            naive = naive_bands(list(values), self.LADDER)
            assert count_transitions(filtered) <= count_transitions(naive)
