"""
Unit tests for algorithms/orchestration/node_manager.py

Tests cover:
- qos_negotiate() level selection and refusal
- LocalResourceManager residency (admit, evict, update_claims)
- ingest_tick() monitoring and input checks
- detect_overload() latching with dwell, unlatching once the node empties
- enforce() escalation ladder: QoS requests, throttles, reports
- build_status_report() contents
- install_tt_table() staging and activation
"""

import pytest
from conftest import MB, make_container, make_node, mb_claim

from algorithms.orchestration.core_model import ContainerSpec, TtConfig
from algorithms.orchestration.errors import (
    CapacityExceeded,
    MixedTickBatch,
    NotAdaptive,
    UnknownContainer,
    UnsupportedClass,
)
from algorithms.orchestration.monitor import UsageSample
from algorithms.orchestration.node_manager import (
    ActionKind,
    LocalResourceManager,
    Mode,
    qos_negotiate,
)
from algorithms.orchestration.slot_table import build_slot_table


def drive(lrm, tick, usage):
    """One monitoring and enforcement round with one task per container."""
    samples = [
        UsageSample(tick, cid, f"{cid}/0", MB, value) for cid, value in usage.items()
    ]
    lrm.ingest_tick(samples, tick)
    changes = lrm.detect_overload(tick)
    actions = lrm.enforce(tick)
    return changes, actions


def run_until(lrm, usage, start, stop):
    """Drive ticks start..stop-1, collecting changes and actions by tick."""
    history = {}
    for tick in range(start, stop):
        history[tick] = drive(lrm, tick, usage)
    return history


def run_complying(lrm, usage, start, stop):
    """Like run_until, but every QoS request is accepted at level 1."""
    history = {}
    for tick in range(start, stop):
        changes, actions = drive(lrm, tick, usage)
        for action in actions:
            if action.kind is ActionKind.QOS_REDUCE_REQUEST:
                lrm.set_qos_level(action.container_id, 1)
        history[tick] = (changes, actions)
    return history


def first_tick(history, predicate):
    for tick in sorted(history):
        changes, actions = history[tick]
        if predicate(changes, actions):
            return tick
    return None


@pytest.fixture
def lrm(node, defaults):
    return LocalResourceManager(node, defaults)


RT = make_container("rt", mb_claim(3, 3, strict=True), criticality=5)
BE = make_container("be", mb_claim(1, 6))
BE1 = ContainerSpec(
    id="be1", claims=(mb_claim(1, 6),), adaptive=True, qos_levels=(1.0, 0.5)
)
BE2 = make_container("be2", mb_claim(1, 6))


class TestQosNegotiate:
    """Tests for qos_negotiate()."""

    SPEC = ContainerSpec(id="a", adaptive=True, qos_levels=(1.0, 0.7, 0.4))

    def test_least_reducing_level(self):
        """Test the first level meeting the reduction is chosen."""
        assert qos_negotiate(self.SPEC, 0, 0.25) == 1

    def test_deeper_reduction(self):
        """Test a larger reduction moves further down the ladder."""
        assert qos_negotiate(self.SPEC, 0, 0.5) == 2

    def test_exact_level_within_epsilon(self):
        """Test a level equal to the target is accepted."""
        assert qos_negotiate(self.SPEC, 0, 0.3) == 1

    def test_zero_reduction_keeps_level(self):
        """Test no reduction keeps the current level."""
        assert qos_negotiate(self.SPEC, 1, 0.0) == 1

    def test_refuse(self):
        """Test None when no level reduces enough."""
        assert qos_negotiate(self.SPEC, 0, 0.7) is None

    def test_not_adaptive(self):
        """Test non-adaptive specs raise NotAdaptive."""
        with pytest.raises(NotAdaptive):
            qos_negotiate(BE, 0, 0.1)


class TestResidency:
    """Tests for admit/evict/update_claims."""

    def test_admit_creates_monitor_state(self, lrm):
        """Test a resident gets filters and bands per claimed resource."""
        lrm.admit(RT, tick=0)
        assert ("rt", MB) in lrm.state.filters
        assert lrm.state.band("rt", MB) == 0
        assert lrm.state.strict_reserved(MB) == 3

    def test_strict_capacity_enforced(self, lrm):
        """Test strict reservations above L raise CapacityExceeded."""
        lrm.admit(make_container("a", mb_claim(6, 6, strict=True)), 0)
        with pytest.raises(CapacityExceeded):
            lrm.admit(make_container("b", mb_claim(5, 5, strict=True)), 0)

    def test_loose_claims_overbook(self, lrm):
        """Test loose limits may exceed capacity."""
        for i in range(4):
            lrm.admit(make_container(f"be{i}", mb_claim(3, 8)), 0)
        assert len(lrm.state.residents) == 4

    def test_evict_unknown(self, lrm):
        """Test evicting a non-resident raises UnknownContainer."""
        with pytest.raises(UnknownContainer):
            lrm.evict("ghost")

    def test_evict_drops_state(self, lrm):
        """Test eviction removes monitor state."""
        lrm.admit(BE, 0)
        lrm.evict("be")
        assert ("be", MB) not in lrm.state.filters
        assert "be" not in lrm.state.health

    def test_update_claims_keeps_filters(self, lrm):
        """Test changed claims keep the smoothed usage."""
        lrm.admit(BE, 0)
        drive(lrm, 1, {"be": 350.0})
        lrm.update_claims(make_container("be", mb_claim(2, 6)))
        assert lrm.state.smoothed("be", MB) == 350.0
        assert lrm.state.residents["be"].spec.claims[0].request_levels == 2


class TestIngest:
    """Tests for ingest_tick()."""

    def test_unknown_container(self, lrm):
        """Test samples from non-residents are rejected."""
        with pytest.raises(UnknownContainer):
            lrm.ingest_tick([UsageSample(1, "ghost", "t", MB, 1.0)], 1)

    def test_wrong_tick(self, lrm):
        """Test samples stamped with another tick are rejected."""
        lrm.admit(BE, 0)
        with pytest.raises(MixedTickBatch):
            lrm.ingest_tick([UsageSample(2, "be", "t", MB, 1.0)], 1)

    def test_band_settles_after_dwell(self, lrm, defaults):
        """Test a constant stream reaches its band after N samples."""
        lrm.admit(BE, 0)
        for tick in range(1, defaults.dwell):
            drive(lrm, tick, {"be": 350.0})
            assert lrm.state.band("be", MB) == 0
        drive(lrm, defaults.dwell, {"be": 350.0})
        assert lrm.state.band("be", MB) == 3
        assert lrm.state.node_bands[MB].current_band == 3

    def test_tasks_are_summed(self, lrm):
        """Test per-task samples aggregate into the container stream."""
        lrm.admit(BE, 0)
        lrm.ingest_tick(
            [
                UsageSample(1, "be", "be/0", MB, 100.0),
                UsageSample(1, "be", "be/1", MB, 250.0),
            ],
            1,
        )
        assert lrm.state.smoothed("be", MB) == 350.0


class TestEscalation:
    """Tests for detect_overload() and enforce()."""

    def test_latch_after_dwell(self, lrm, defaults):
        """Test the latch needs overload_dwell ticks at or above threshold."""
        lrm.admit(RT, 0)
        lrm.admit(BE, 0)
        history = run_until(lrm, {"rt": 250.0, "be": 720.0}, 1, 12)
        latch = first_tick(history, lambda c, a: any(x.latched for x in c))
        band_tick = defaults.dwell
        assert latch == band_tick + defaults.overload_dwell - 1
        assert lrm.state.modes[MB] is Mode.STRICT_ENFORCEMENT

    def test_throttle_then_report(self, lrm, defaults):
        """Test Throttle G ticks after the latch, then ReportToGrm G later."""
        lrm.admit(RT, 0)
        lrm.admit(BE, 0)
        history = run_until(lrm, {"rt": 250.0, "be": 720.0}, 1, 20)
        latch = first_tick(history, lambda c, a: any(x.latched for x in c))

        def has(kind):
            return lambda c, a: any(x.kind is kind for x in a)

        throttle = first_tick(history, has(ActionKind.THROTTLE))
        report = first_tick(history, has(ActionKind.REPORT_TO_GRM))
        assert throttle - latch == defaults.grace
        assert report - throttle == defaults.grace
        action = history[throttle][1][0]
        assert action.container_id == "be"
        assert action.detail == 1.0
        assert lrm.demand_cap("be", MB) == 100.0
        assert lrm.demand_cap("rt", MB) is None

    def test_report_repeats_after_retry(self, lrm, defaults):
        """Test ReportToGrm recurs every escalation_retry ticks while latched."""
        lrm.admit(RT, 0)
        lrm.admit(BE, 0)
        history = run_until(lrm, {"rt": 250.0, "be": 720.0}, 1, 40)
        reports = [
            t
            for t, (_, actions) in sorted(history.items())
            if any(a.kind is ActionKind.REPORT_TO_GRM for a in actions)
        ]
        assert len(reports) >= 2
        assert reports[1] - reports[0] == defaults.escalation_retry

    def test_qos_request_first(self, lrm, defaults):
        """Test adaptive residents get QosReduceRequest at the latch tick."""
        for spec in (RT, BE1, BE2):
            lrm.admit(spec, 0)
        usage = {"rt": 250.0, "be1": 360.0, "be2": 360.0}
        history = run_until(lrm, usage, 1, 8)
        latch = first_tick(history, lambda c, a: any(x.latched for x in c))
        actions = history[latch][1]
        assert [a.kind for a in actions] == [ActionKind.QOS_REDUCE_REQUEST]
        assert actions[0].container_id == "be1"
        assert 0.0 <= actions[0].detail <= 1.0

    def test_complied_container_not_throttled(self, lrm, defaults):
        """Test only non-complying offenders are throttled."""
        for spec in (RT, BE1, BE2):
            lrm.admit(spec, 0)
        usage = {"rt": 250.0, "be1": 360.0, "be2": 360.0}
        history = run_complying(lrm, usage, 1, 12)
        throttled = [
            a.container_id
            for _, actions in history.values()
            for a in actions
            if a.kind is ActionKind.THROTTLE
        ]
        assert throttled == ["be2"]
        assert lrm.state.residents["be1"].complied

    def test_nothing_to_throttle_reports_immediately(self, lrm, defaults):
        """Test an overload made of reservations escalates straight away."""
        lrm.admit(make_container("big", mb_claim(9, 9, strict=True)), 0)
        history = run_until(lrm, {"big": 960.0}, 1, 15)
        latch = first_tick(history, lambda c, a: any(x.latched for x in c))
        kinds = [a.kind for a in history[latch + defaults.grace][1]]
        assert kinds == [ActionKind.REPORT_TO_GRM]

    def test_unlatch_lifts_caps_and_restores_qos(self, lrm, defaults):
        """Test clearing the overload removes throttles and resets QoS."""
        for spec in (RT, BE1, BE2):
            lrm.admit(spec, 0)
        usage = {"rt": 250.0, "be1": 360.0, "be2": 360.0}
        run_complying(lrm, usage, 1, 12)
        assert lrm.demand_cap("be2", MB) == 100.0

        calm = {"rt": 250.0, "be1": 100.0, "be2": 100.0}
        history = run_until(lrm, calm, 12, 40)
        cleared = [
            change
            for changes, _ in history.values()
            for change in changes
            if not change.latched
        ]
        assert len(cleared) == 1
        assert cleared[0].restored == ("be1",)
        assert lrm.state.residents["be1"].qos_index == 0
        assert lrm.demand_cap("be2", MB) is None
        assert lrm.state.modes[MB] is Mode.RELAXED

    def test_emptied_node_unlatches(self, lrm, defaults):
        """Test a latched node whose last resident leaves decays and clears."""
        lrm.admit(make_container("big", mb_claim(9, 9, strict=True)), 0)
        history = run_until(lrm, {"big": 960.0}, 1, 15)
        assert lrm.state.overload[MB].latched
        assert first_tick(
            history, lambda c, a: any(x.kind is ActionKind.REPORT_TO_GRM for x in a)
        )

        lrm.evict("big")
        after = run_until(lrm, {}, 15, 60)
        cleared = first_tick(after, lambda c, a: any(not x.latched for x in c))
        assert cleared is not None
        assert not lrm.state.overload[MB].latched
        assert lrm.state.modes[MB] is Mode.RELAXED
        assert lrm.state.node_bands[MB].current_band == 0
        assert lrm.build_status_report(59).resources[MB].overloaded is False
        later = [
            t
            for t, (_, actions) in after.items()
            if t >= cleared and any(a.kind is ActionKind.REPORT_TO_GRM for a in actions)
        ]
        assert later == []

    def test_silent_populated_node_keeps_state(self, lrm, defaults):
        """Test a tick without samples leaves a populated node's filters alone."""
        lrm.admit(BE, 0)
        run_until(lrm, {"be": 350.0}, 1, defaults.dwell + 1)
        before = lrm.state.node_filters[MB]
        lrm.ingest_tick([], defaults.dwell + 1)
        assert lrm.state.node_filters[MB] == before
        assert lrm.state.node_bands[MB].current_band == 3

    def test_strict_grant_never_below_request(self, lrm):
        """Test Strict residents are granted at least their request."""
        lrm.admit(RT, 0)
        lrm.admit(BE, 0)
        run_until(lrm, {"rt": 50.0, "be": 900.0}, 1, 20)
        assert lrm.state.residents["rt"].granted[MB] == 3
        assert lrm.state.residents["be"].granted[MB] <= 6


class TestStatusReport:
    """Tests for build_status_report()."""

    def test_contents(self, lrm):
        """Test per-resource and per-container fields."""
        lrm.admit(RT, 0)
        lrm.admit(BE, 0)
        run_until(lrm, {"rt": 250.0, "be": 360.0}, 1, 5)
        report = lrm.build_status_report(4)
        status = report.resources[MB]
        assert status.levels == 10
        assert status.free_strict_levels == 7
        assert status.aggregate_band == 6
        assert status.threshold == 9
        assert not status.overloaded and not status.escalated
        assert report.containers["be"].bands == {MB: 3}
        assert report.escalated == []

    def test_snapshot_is_detached(self, lrm):
        """Test later ticks do not alter an earlier report."""
        lrm.admit(BE, 0)
        run_until(lrm, {"be": 350.0}, 1, 5)
        report = lrm.build_status_report(4)
        run_until(lrm, {"be": 750.0}, 5, 12)
        assert report.containers["be"].bands[MB] == 3

    def test_payload_keys(self, lrm):
        """Test the serialized report layout."""
        lrm.admit(BE, 0)
        payload = lrm.build_status_report(0).to_payload()
        assert set(payload) == {"node", "tick", "resources", "containers"}
        assert set(payload["resources"]["MemoryBandwidth"]) == {
            "levels",
            "free_strict",
            "band",
            "threshold",
            "overloaded",
            "escalated",
        }
        assert payload["containers"]["be"]["health"] == "Healthy"


class TestMisconfiguration:
    """Tests for confirm_cap()."""

    def test_cap_at_limit(self, lrm):
        """Test a container above its limit is capped at the limit."""
        spec = make_container("greedy", mb_claim(1, 2))
        lrm.admit(spec, 0)
        run_until(lrm, {"greedy": 550.0}, 1, 5)
        assert lrm.confirm_cap("greedy") == [MB]
        assert lrm.demand_cap("greedy", MB) == 200.0


class TestTtInstall:
    """Tests for install_tt_table()."""

    def test_unsupported_node(self, lrm):
        """Test General-only nodes refuse TT tables."""
        table = build_slot_table(TtConfig(1, 12), [])
        with pytest.raises(UnsupportedClass):
            lrm.install_tt_table(table, 0)

    def test_activation_at_hyperperiod_boundary(self, tt_node, defaults):
        """Test a staged table goes live at the next multiple of H."""
        lrm = LocalResourceManager(tt_node, defaults)
        table = build_slot_table(tt_node.tt_config, [])
        state = lrm.install_tt_table(table, 5)
        assert state.tt_pending is table and state.tt_active is None
        for tick in range(6, 13):
            lrm.ingest_tick([], tick)
        assert state.tt_active is table
        assert state.tt_activated_tick == 12

    def test_immediate_activation_on_boundary(self, tt_node, defaults):
        """Test a table installed at a boundary is active at once."""
        lrm = LocalResourceManager(tt_node, defaults)
        table = build_slot_table(tt_node.tt_config, [])
        state = lrm.install_tt_table(table, 24)
        assert state.tt_active is table
        assert state.tt_pending is None


def test_make_node_helper_levels():
    """Test the conftest node builder honours level overrides."""
    assert make_node("x", mb_levels=4).levels(MB) == 4
