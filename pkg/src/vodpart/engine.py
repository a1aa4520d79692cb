"""Discrete-event simulation of the partitioned VoD server.

Each traffic class homes at the partition with the same index. An arriving
request takes a port in its home partition if one is free, otherwise it is
forwarded to the following partitions in order; if none has a free port the
request is lost. Holding times are drawn per request from the class's hold
law and a departure is scheduled for every admitted request.

Randomness comes from one ``numpy.random.SeedSequence`` per scenario seed,
spawned into independent arrival, hold and title streams per class, so a run
is a pure function of its scenario.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from vodpart.analytic import PartitionPlan
from vodpart.popularity import ZipfPopularity, sample_title

SessionKind = Literal["steady", "interactive"]
CascadePolicy = Literal["forward-no-wrap", "forward-wrap"]

CASCADE_POLICIES = ("forward-no-wrap", "forward-wrap")
DEFAULT_MAX_HOLD = {"steady": 120.0, "interactive": 80.0}


@dataclass(frozen=True)
class HoldLaw:
    """Holding-time distribution.

    ``uniform`` draws from (0, max_hold]. ``exponential`` has mean
    ``mean_hold``, which defaults to ``max_hold / 2`` so that switching the
    law keeps the offered load unchanged.
    """

    kind: Literal["uniform", "exponential"] = "uniform"
    max_hold: float = 120.0
    mean_hold: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential"):
            raise ValueError(f"unknown hold law {self.kind!r}")
        if not self.max_hold > 0:
            raise ValueError("max_hold must be positive")
        if self.mean_hold is not None:
            if self.kind == "uniform":
                raise ValueError("a uniform hold law is fixed by max_hold; mean_hold is not accepted")
            if not self.mean_hold > 0:
                raise ValueError("mean_hold must be positive")

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return self.max_hold / 2.0
        return self.mean_hold if self.mean_hold is not None else self.max_hold / 2.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            # 1 - U lies in (0, 1], so holds are strictly positive and capped
            return self.max_hold * (1.0 - rng.random(size))
        return rng.exponential(self.mean, size)


@dataclass(frozen=True)
class TrafficClass:
    class_id: int
    arrival_rate: float
    session_kind: SessionKind = "steady"
    hold_law: HoldLaw | None = None

    def __post_init__(self):
        if self.session_kind not in DEFAULT_MAX_HOLD:
            raise ValueError(f"unknown session kind {self.session_kind!r}")
        if not self.arrival_rate >= 0 or math.isinf(self.arrival_rate):
            raise ValueError(f"arrival rate must be finite and nonnegative, got {self.arrival_rate!r}")
        if self.hold_law is None:
            object.__setattr__(self, "hold_law", HoldLaw("uniform", DEFAULT_MAX_HOLD[self.session_kind]))

    @property
    def mean_hold(self) -> float:
        return self.hold_law.mean

    @property
    def erlangs(self) -> float:
        return self.arrival_rate * self.hold_law.mean


@dataclass(frozen=True)
class Scenario:
    plan: PartitionPlan
    classes: tuple[TrafficClass, ...]
    horizon: float = 400.0
    seed: int = 0
    popularity: ZipfPopularity | None = None
    cascade_policy: CascadePolicy = "forward-no-wrap"
    warmup_fraction: float = 0.1
    sample_interval: float | None = None
    scenario_id: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) != self.plan.k:
            raise ValueError(f"classes: expected {self.plan.k} classes (one per partition), got {len(self.classes)}")
        for j, cls in enumerate(self.classes, start=1):
            if cls.class_id != j:
                raise ValueError(f"classes: class at position {j} has class_id {cls.class_id}; ids must run 1..k")
        if not self.horizon > 0 or math.isinf(self.horizon):
            raise ValueError("horizon must be positive and finite")
        if self.cascade_policy not in CASCADE_POLICIES:
            raise ValueError(f"unknown cascade policy {self.cascade_policy!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.sample_interval is not None and not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")

    @property
    def warmup(self) -> float:
        return self.warmup_fraction * self.horizon

    def scan_order(self, home: int) -> list[int]:
        """Partitions (1-based) probed for a request homed at ``home``."""
        k = self.plan.k
        order = list(range(home, k + 1))
        if self.cascade_policy == "forward-wrap":
            order += list(range(1, home))
        return order

    def with_changes(self, **changes) -> Scenario:
        return replace(self, **changes)


@dataclass(frozen=True, slots=True)
class EventRecord:
    time: float
    kind: Literal["arrival", "departure"]
    class_id: int
    request_id: int
    title: int | None = None
    # serving partition, None for a denied arrival; run() fills it when recording
    partition: int | None = None


@dataclass
class ServerState:
    """Occupied ports per partition plus the registry of requests in service."""

    capacities: tuple[int, ...]
    occupied: list[int] = field(default_factory=list)
    in_service: dict[int, tuple[int, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.occupied:
            self.occupied = [0] * len(self.capacities)

    @classmethod
    def empty(cls, plan: PartitionPlan) -> ServerState:
        return cls(plan.capacities)

    @property
    def free_ports(self) -> int:
        return sum(self.capacities) - sum(self.occupied)

    def check(self) -> None:
        counts = [0] * len(self.capacities)
        for part, _ in self.in_service.values():
            counts[part - 1] += 1
        for j, (q, c, n) in enumerate(zip(self.occupied, self.capacities, counts), start=1):
            if not 0 <= q <= c:
                raise AssertionError(f"partition {j}: occupancy {q} outside [0, {c}]")
            if q != n:
                raise AssertionError(f"partition {j}: occupancy {q} but {n} registered requests")


def _rng_streams(seed: int, k: int) -> list[tuple[np.random.Generator, ...]]:
    root = np.random.SeedSequence(seed)
    return [tuple(np.random.default_rng(s) for s in child.spawn(3)) for child in root.spawn(k)]


def _arrival_times(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    if rate == 0:
        return np.empty(0)
    mean_n = rate * horizon
    chunk = int(mean_n + 6.0 * math.sqrt(mean_n) + 16)
    parts = []
    t0 = 0.0
    while True:
        # subnormal rates overflow to inf gaps, which correctly yield no arrivals
        with np.errstate(over="ignore", divide="ignore"):
            ts = t0 + np.cumsum(rng.standard_exponential(chunk) / rate)
        if ts[-1] > horizon:
            parts.append(ts[: np.searchsorted(ts, horizon, side="right")])
            break
        parts.append(ts)
        t0 = ts[-1]
    return np.concatenate(parts)


def generate_arrivals(cls: TrafficClass, horizon: float, rng: np.random.Generator) -> list[EventRecord]:
    """Poisson arrivals of one class on [0, horizon], in time order.

    Request ids are left at -1; ``run`` assigns them after merging classes.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    times = _arrival_times(cls.arrival_rate, horizon, rng)
    return [EventRecord(t, "arrival", cls.class_id, -1) for t in times.tolist()]


def draw_hold_time(cls: TrafficClass, rng: np.random.Generator) -> float:
    return float(cls.hold_law.sample(rng, 1)[0])


def admit(request: EventRecord, state: ServerState, scenario: Scenario, departure: float | None = None) -> int | None:
    """Place an arriving request; returns the serving partition or None if denied.

    The state is modified only on admission.
    """
    if request.kind != "arrival":
        raise ValueError(f"admit() needs an arrival, got a {request.kind} event")
    if not 1 <= request.class_id <= scenario.plan.k:
        raise ValueError(f"class_id {request.class_id} has no home partition")
    if request.request_id in state.in_service:
        raise ValueError(f"request {request.request_id} is already in service")
    occ, caps = state.occupied, state.capacities
    for j in scenario.scan_order(request.class_id):
        if occ[j - 1] < caps[j - 1]:
            occ[j - 1] += 1
            state.in_service[request.request_id] = (j, departure if departure is not None else math.inf)
            return j
    return None


def release(request_id: int, state: ServerState) -> ServerState:
    try:
        part, _ = state.in_service.pop(request_id)
    except KeyError:
        raise KeyError(f"request {request_id} is not in service") from None
    state.occupied[part - 1] -= 1
    return state


def run(
    scenario: Scenario,
    *,
    observer: Callable[[float, str, ServerState], None] | None = None,
    record_events: bool = False,
    batches: int = 20,
    arrivals: Sequence[tuple[float, int, float]] | None = None,
):
    """Simulate ``scenario`` to its horizon and drain the remaining sessions.

    Arrivals after the warm-up (``t >= warmup``) are tallied; occupancy
    statistics are time averages over [warmup, horizon]. ``observer`` is
    called after every processed event with ``(time, kind, state)``.
    ``arrivals`` replaces the generated workload with explicit
    ``(time, class_id, hold)`` triples, mainly for hand-traced checks.
    Returns a :class:`vodpart.metrics.MetricsReport`.
    """
    from vodpart.metrics import build_report

    plan = scenario.plan
    k = plan.k
    caps = list(plan.capacities)
    horizon = scenario.horizon
    w0 = scenario.warmup
    span = horizon - w0
    pop = scenario.popularity

    time_parts, class_parts, hold_parts, title_parts = [], [], [], []
    if arrivals is not None:
        explicit = [(float(t), int(c) - 1, float(h)) for t, c, h in arrivals if 0 <= t <= horizon]
        if any(not 0 <= c < k for _, c, _ in explicit) or any(h <= 0 for _, _, h in explicit):
            raise ValueError("explicit arrivals need class ids in 1..k and positive holds")
        time_parts.append(np.array([a[0] for a in explicit], dtype=float))
        class_parts.append(np.array([a[1] for a in explicit], dtype=np.int64))
        hold_parts.append(np.array([a[2] for a in explicit], dtype=float))
        pop = None
    else:
        streams = _rng_streams(scenario.seed, k)
        for idx, (cls, (arr_rng, hold_rng, title_rng)) in enumerate(zip(scenario.classes, streams)):
            ts = _arrival_times(cls.arrival_rate, horizon, arr_rng)
            time_parts.append(ts)
            class_parts.append(np.full(ts.size, idx, dtype=np.int64))
            hold_parts.append(cls.hold_law.sample(hold_rng, ts.size))
            if pop is not None:
                title_parts.append(sample_title(pop, title_rng, ts.size))
    times_arr = np.concatenate(time_parts)
    order = np.argsort(times_arr, kind="stable")
    times = times_arr[order].tolist()
    homes = np.concatenate(class_parts)[order].tolist()
    holds = np.concatenate(hold_parts)[order].tolist()
    titles = np.concatenate(title_parts)[order].tolist() if pop is not None else None

    scan = [[j - 1 for j in scenario.scan_order(h + 1)] for h in range(k)]

    state = ServerState.empty(plan)
    occ = state.occupied
    registry = state.in_service
    free_total = plan.total

    offered = [0] * k
    admitted = [0] * k
    denied = [0] * k
    home_blocked = [0] * k
    popular = [0] * k
    all_full = [0] * k
    part_blocked = [0] * k
    part_admitted = [0] * k
    batch_offered = [[0] * batches for _ in range(k)]
    batch_denied = [[0] * batches for _ in range(k)]
    batch_home = [[0] * batches for _ in range(k)]

    area = [0.0] * k
    full_time = [0.0] * k
    last = [0.0] * k

    def accumulate(p: int, t: float) -> None:
        a = last[p]
        if a < w0:
            a = w0
        b = t if t < horizon else horizon
        if b > a:
            q = occ[p]
            area[p] += q * (b - a)
            if q == caps[p]:
                full_time[p] += b - a
        last[p] = t

    interval = scenario.sample_interval or horizon / 100.0
    n_samples = int(math.floor(horizon / interval + 1e-9)) + 1
    series: list[tuple[float, int]] = []
    next_sample = 0.0

    events: list[EventRecord] | None = [] if record_events else None
    heap: list[tuple[float, int, int]] = []
    heappush, heappop = heapq.heappush, heapq.heappop
    n = len(times)
    i = 0
    while i < n or heap:
        if heap and (i >= n or heap[0][0] <= times[i]):
            t, rid, p = heappop(heap)
            while len(series) < n_samples and next_sample < t:
                series.append((next_sample, free_total))
                next_sample = len(series) * interval
            accumulate(p, t)
            occ[p] -= 1
            free_total += 1
            del registry[rid]
            if events is not None:
                events.append(EventRecord(t, "departure", homes[rid] + 1, rid, None, p + 1))
            if observer is not None:
                observer(t, "departure", state)
            continue

        t = times[i]
        home = homes[i]
        while len(series) < n_samples and next_sample < t:
            series.append((next_sample, free_total))
            next_sample = len(series) * interval
        counted = t >= w0
        p = -1
        if free_total:
            probes = scan[home]
            for pos, q in enumerate(probes):
                if occ[q] < caps[q]:
                    p = q
                    break
            else:
                pos = len(probes)
            if counted:
                for q in probes[:pos]:
                    part_blocked[q] += 1
        elif counted:
            all_full[home] += 1

        if counted:
            offered[home] += 1
            b = int((t - w0) / span * batches) if span > 0 else 0
            if b >= batches:
                b = batches - 1
            batch_offered[home][b] += 1
            if titles is not None and titles[i] <= pop.popular_titles:
                popular[home] += 1
            if p != home:
                home_blocked[home] += 1
                batch_home[home][b] += 1
            if p < 0:
                denied[home] += 1
                batch_denied[home][b] += 1
            else:
                admitted[home] += 1
                part_admitted[p] += 1

        if p >= 0:
            accumulate(p, t)
            occ[p] += 1
            free_total -= 1
            dep = t + holds[i]
            heappush(heap, (dep, i, p))
            registry[i] = (p + 1, dep)
        if events is not None:
            events.append(
                EventRecord(t, "arrival", home + 1, i, titles[i] if titles is not None else None, p + 1 if p >= 0 else None)
            )
        if observer is not None:
            observer(t, "arrival", state)
        i += 1

    while len(series) < n_samples:
        series.append((next_sample, free_total))
        next_sample = len(series) * interval
    for p in range(k):
        accumulate(p, horizon)

    # arrivals denied on the all-full fast path probed every partition in their scan
    for h in range(k):
        if all_full[h]:
            for q in scan[h]:
                part_blocked[q] += all_full[h]

    return build_report(
        scenario,
        offered=offered,
        admitted=admitted,
        denied=denied,
        home_blocked=home_blocked,
        popular=popular if pop is not None else None,
        part_blocked=part_blocked,
        part_admitted=part_admitted,
        occupancy_area=area,
        full_time=full_time,
        free_port_series=series,
        batch_offered=batch_offered,
        batch_denied=batch_denied,
        batch_home_blocked=batch_home,
        final_occupancy=list(occ),
        events=events,
    )
