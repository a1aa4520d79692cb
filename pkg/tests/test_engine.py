import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vodpart.analytic import PartitionPlan, erlang_b
from vodpart.engine import (
    EventRecord,
    HoldLaw,
    Scenario,
    ServerState,
    TrafficClass,
    admit,
    draw_hold_time,
    generate_arrivals,
    release,
    run,
)
from vodpart.metrics import free_port_trajectory
from vodpart.popularity import ZipfPopularity


def make_scenario(caps, rates, **kw):
    plan = PartitionPlan(tuple(caps))
    law = kw.pop("hold_law", None)
    classes = [TrafficClass(j + 1, r, hold_law=law) for j, r in enumerate(rates)]
    return Scenario(plan, classes, **kw)


def arrival(class_id, rid=0, t=0.0):
    return EventRecord(t, "arrival", class_id, rid)


class TestTypes:
    def test_default_holds_follow_session_kind(self):
        assert TrafficClass(1, 0.1).hold_law.max_hold == 120.0
        assert TrafficClass(1, 0.1, "interactive").hold_law.max_hold == 80.0
        assert TrafficClass(1, 0.1, "interactive").mean_hold == 40.0

    def test_exponential_mean_defaults_to_half_cap(self):
        assert HoldLaw("exponential", 120.0).mean == 60.0
        assert HoldLaw("exponential", mean_hold=5.0).mean == 5.0

    def test_rejects_bad_classes(self):
        with pytest.raises(ValueError):
            TrafficClass(1, -0.5)
        with pytest.raises(ValueError):
            TrafficClass(1, 0.5, "vcr")
        with pytest.raises(ValueError):
            HoldLaw("uniform", 0.0)

    def test_scenario_needs_one_class_per_partition(self):
        with pytest.raises(ValueError, match="classes"):
            Scenario(PartitionPlan((2, 2)), [TrafficClass(1, 0.1)])
        with pytest.raises(ValueError, match="class_id"):
            Scenario(PartitionPlan((2, 2)), [TrafficClass(2, 0.1), TrafficClass(1, 0.1)])
        with pytest.raises(ValueError):
            make_scenario([2], [0.1], horizon=0.0)

    def test_scan_order(self):
        sc = make_scenario([1, 1, 1, 1], [0, 0, 0, 0])
        assert sc.scan_order(2) == [2, 3, 4]
        assert sc.with_changes(cascade_policy="forward-wrap").scan_order(3) == [3, 4, 1, 2]


class TestArrivals:
    def test_zero_rate_is_empty(self):
        assert generate_arrivals(TrafficClass(1, 0.0), 100.0, np.random.default_rng(1)) == []

    def test_poisson_count_and_gap(self):
        events = generate_arrivals(TrafficClass(1, 2.0), 1e5, np.random.default_rng(11))
        n = len(events)
        assert abs(n - 2e5) < 3 * math.sqrt(2e5)
        times = np.array([e.time for e in events])
        assert np.all(np.diff(times) > 0)
        assert times[0] > 0 and times[-1] <= 1e5
        gaps = np.diff(np.concatenate([[0.0], times]))
        assert gaps.mean() == pytest.approx(0.5, rel=0.01)

    def test_deterministic(self):
        a = generate_arrivals(TrafficClass(3, 0.7), 500.0, np.random.default_rng(99))
        b = generate_arrivals(TrafficClass(3, 0.7), 500.0, np.random.default_rng(99))
        assert a == b
        assert all(e.kind == "arrival" and e.class_id == 3 for e in a)


class TestAdmitRelease:
    def test_home_partition_first(self):
        sc = make_scenario([2, 2, 2, 2], [0] * 4)
        state = ServerState.empty(sc.plan)
        assert admit(arrival(3), state, sc) == 3
        assert state.occupied == [0, 0, 1, 0]

    def test_forward_to_next_block(self):
        sc = make_scenario([1, 2, 2], [0] * 3)
        state = ServerState(sc.plan.capacities, [0, 2, 0])
        assert admit(arrival(2), state, sc) == 3
        assert state.occupied == [0, 2, 1]

    def test_denied_leaves_state_untouched(self):
        sc = make_scenario([1, 2, 2], [0] * 3)
        state = ServerState(sc.plan.capacities, [0, 2, 2])
        assert admit(arrival(2, rid=5), state, sc) is None
        assert state.occupied == [0, 2, 2]
        assert state.in_service == {}

    def test_no_wrap_ignores_earlier_partitions(self):
        sc = make_scenario([1, 1], [0, 0])
        state = ServerState(sc.plan.capacities, [0, 1])
        assert admit(arrival(2), state, sc) is None
        assert admit(arrival(2), state, sc.with_changes(cascade_policy="forward-wrap")) == 1

    def test_departure_is_not_admissible(self):
        sc = make_scenario([1], [0])
        with pytest.raises(ValueError):
            admit(EventRecord(0.0, "departure", 1, 0), ServerState.empty(sc.plan), sc)

    def test_admit_then_release_restores(self):
        sc = make_scenario([2, 2], [0, 0])
        state = ServerState(sc.plan.capacities, [1, 0], {})
        state.in_service[7] = (1, 3.0)
        before = list(state.occupied)
        assert admit(arrival(1, rid=8), state, sc, departure=5.0) == 1
        assert state.in_service[8] == (1, 5.0)
        release(8, state)
        assert state.occupied == before
        assert 8 not in state.in_service

    def test_release_unknown(self):
        sc = make_scenario([2], [0])
        with pytest.raises(KeyError):
            release(42, ServerState.empty(sc.plan))

    @given(st.lists(st.tuples(st.booleans(), st.integers(1, 3)), max_size=200))
    def test_interleaving_keeps_bounds(self, ops):
        sc = make_scenario([2, 3, 1], [0] * 3)
        state = ServerState.empty(sc.plan)
        live = []
        for rid, (is_admit, home) in enumerate(ops):
            if is_admit or not live:
                if admit(arrival(home, rid=rid), state, sc) is not None:
                    live.append(rid)
            else:
                release(live.pop(0), state)
            state.check()


class TestHoldTimes:
    def test_uniform_within_cap(self):
        cls = TrafficClass(1, 1.0)
        rng = np.random.default_rng(3)
        samples = [draw_hold_time(cls, rng) for _ in range(5000)]
        assert all(0 < h <= 120.0 for h in samples)
        interactive = cls.hold_law.__class__("uniform", 80.0).sample(rng, 5000)
        assert interactive.max() <= 80.0 and interactive.min() > 0

    def test_exponential_mean(self):
        law = HoldLaw("exponential", mean_hold=120.0)
        samples = law.sample(np.random.default_rng(5), 1_000_000)
        assert samples.mean() == pytest.approx(120.0, rel=0.01)

    def test_deterministic_stream(self):
        cls = TrafficClass(1, 1.0, hold_law=HoldLaw("exponential", mean_hold=3.0))
        a = [draw_hold_time(cls, np.random.default_rng(8)) for _ in range(3)]
        b = [draw_hold_time(cls, np.random.default_rng(8)) for _ in range(3)]
        assert a == b


class TestRun:
    def test_zero_traffic(self):
        r = run(make_scenario([3, 3], [0.0, 0.0]))
        assert r.offered == r.denied == 0
        assert r.blocking is None
        assert all(c.blocking is None for c in r.classes)
        assert r.mean_free_ports == 6

    def test_hand_traced_denial(self):
        sc = make_scenario([1], [0.0], horizon=20.0, warmup_fraction=0.0)
        r = run(sc, arrivals=[(1.0, 1, 10.0), (2.0, 1, 10.0)])
        assert (r.offered, r.admitted, r.denied) == (2, 1, 1)
        assert r.final_occupancy == [0]

    def test_departure_before_arrival_at_same_instant(self):
        sc = make_scenario([1], [0.0], horizon=20.0, warmup_fraction=0.0)
        r = run(sc, arrivals=[(1.0, 1, 1.0), (2.0, 1, 5.0)])
        assert r.denied == 0 and r.admitted == 2

    def test_overflow_is_counted_as_home_block(self):
        sc = make_scenario([1, 1], [0.0, 0.0], horizon=20.0, warmup_fraction=0.0)
        r = run(sc, arrivals=[(1.0, 1, 5.0), (2.0, 1, 5.0), (3.0, 2, 5.0)])
        c1, c2 = r.classes
        assert (c1.admitted, c1.home_blocked, c1.denied) == (2, 1, 0)
        assert (c2.admitted, c2.home_blocked, c2.denied) == (0, 1, 1)
        p1, p2 = r.partitions
        assert (p1.attempts, p1.blocked, p1.admitted) == (2, 1, 1)
        assert (p2.attempts, p2.blocked, p2.admitted) == (2, 1, 1)

    def test_deterministic(self):
        sc = make_scenario([3, 2, 4], [0.05, 0.08, 0.02], seed=17)
        assert run(sc) == run(sc)
        assert run(sc).to_json() == run(sc).to_json()

    def test_different_seeds_differ(self):
        sc = make_scenario([3, 2, 4], [0.05, 0.08, 0.02], seed=17)
        a, b = run(sc), run(sc.with_changes(seed=18))
        assert a.free_port_series != b.free_port_series

    def test_warmup_excludes_early_arrivals(self):
        sc = make_scenario([1], [0.0], horizon=100.0, warmup_fraction=0.5)
        r = run(sc, arrivals=[(10.0, 1, 1.0), (60.0, 1, 1.0)])
        assert r.offered == 1

    def test_replay_through_public_operations(self):
        sc = make_scenario([2, 1, 2], [0.04, 0.05, 0.03], seed=4, warmup_fraction=0.0)
        report = run(sc, record_events=True)
        state = ServerState.empty(sc.plan)
        for ev in report.events:
            if ev.kind == "arrival":
                assert admit(ev, state, sc) == ev.partition
            else:
                release(ev.request_id, state)
            state.check()
        assert state.occupied == [0, 0, 0]
        admitted = sum(1 for e in report.events if e.kind == "arrival" and e.partition)
        assert admitted == report.admitted

    def test_free_port_series_matches_event_replay(self):
        sc = make_scenario([3, 3], [0.06, 0.04], seed=9, sample_interval=7.0)
        report = run(sc, record_events=True)
        series = free_port_trajectory(report.events, sc.plan, 7.0, sc.horizon)
        assert series == report.free_port_series
        assert all(0 <= f <= 6 for _, f in series)

    def test_popularity_metadata(self):
        pop = ZipfPopularity(100, 10, 0.8)
        sc = make_scenario([50], [2.0], seed=1, popularity=pop, horizon=2000.0)
        r = run(sc)
        share = r.classes[0].popular_requests / r.offered
        # exact popular mass for N=100, M=10, alpha=0.8 (direct summation oracle)
        assert share == pytest.approx(0.4382745536008936, abs=0.01)

    def test_mmcc_matches_erlang_b(self):
        sc = make_scenario([10], [5.0], hold_law=HoldLaw("exponential", mean_hold=1.0), horizon=50_000.0, seed=123)
        r = run(sc)
        # ~225k tallied arrivals; 10% relative is about four standard errors
        assert r.blocking.estimate == pytest.approx(erlang_b(5.0, 10), rel=0.10)

    def test_scaling_rates_does_not_lower_blocking(self):
        base = make_scenario([4, 4, 4], [0.03, 0.03, 0.03], horizon=4000.0)
        scaled = base.with_changes(classes=tuple(TrafficClass(c.class_id, c.arrival_rate * 1.5) for c in base.classes))
        lo = hi = 0.0
        for seed in range(10):
            a = run(base.with_changes(seed=seed))
            b = run(scaled.with_changes(seed=seed))
            lo += a.denied / a.offered
            hi += b.denied / b.offered
        assert hi >= lo


@settings(max_examples=60, deadline=None)
@given(
    caps=st.lists(st.integers(1, 4), min_size=1, max_size=4),
    data=st.data(),
)
def test_occupancy_invariants_small(caps, data):
    rates = data.draw(st.lists(st.floats(0, 0.5), min_size=len(caps), max_size=len(caps)))
    policy = data.draw(st.sampled_from(["forward-no-wrap", "forward-wrap"]))
    sc = make_scenario(caps, rates, horizon=60.0, seed=data.draw(st.integers(0, 2**32)), cascade_policy=policy)

    def observer(t, kind, state):
        state.check()

    r = run(sc, observer=observer)
    assert r.final_occupancy == [0] * len(caps)
    assert r.offered == r.admitted + r.denied
