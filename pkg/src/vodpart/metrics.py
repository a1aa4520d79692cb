"""Blocking estimators and the run report.

A report carries per-class and per-partition tallies over the measurement
window, blocking estimates with 95% intervals, time-averaged occupancy, a
sampled free-port trajectory and the matching analytic predictions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Iterable, Sequence

from vodpart.analytic import PartitionPlan, erlang_b, offered_load_paper_literal

Z95 = NormalDist().inv_cdf(0.975)

CSV_COLUMNS = (
    "scenario_id",
    "class_id",
    "offered",
    "admitted",
    "denied",
    "blocking",
    "ci_low",
    "ci_high",
    "erlangs",
    "analytic_blocking",
)


@dataclass(frozen=True)
class BlockingEstimate:
    estimate: float
    ci_low: float
    ci_high: float

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def wilson_interval(successes: float, trials: float, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


def blocking_estimate(denied: int, offered: int, inflation: float = 1.0) -> BlockingEstimate | None:
    """Point estimate denied/offered with a Wilson-score 95% interval.

    ``inflation`` is a variance inflation factor for autocorrelated outcomes;
    the interval is then computed at the effective sample size
    ``offered / inflation``. Returns None when nothing was offered.
    """
    if denied < 0 or offered < 0:
        raise ValueError("counts must be nonnegative")
    if denied > offered:
        raise ValueError(f"denied ({denied}) exceeds offered ({offered})")
    if offered == 0:
        return None
    inflation = max(1.0, inflation)
    p = denied / offered
    n_eff = offered / inflation
    low, high = wilson_interval(p * n_eff, n_eff)
    return BlockingEstimate(p, min(low, p), max(high, p))


def batch_inflation(batch_denied: Sequence[int], batch_offered: Sequence[int]) -> float:
    """Variance inflation of the pooled blocking ratio, estimated by batch means.

    Compares the between-batch variance of the batch ratios with what
    independent Bernoulli outcomes would give. Returns 1 when there is too
    little data to say anything.
    """
    pairs = [(d, n) for d, n in zip(batch_denied, batch_offered) if n > 0]
    total_n = sum(n for _, n in pairs)
    total_d = sum(d for d, _ in pairs)
    if len(pairs) < 5 or total_d == 0 or total_d == total_n:
        return 1.0
    p = total_d / total_n
    # ratio-estimator variance of the pooled mean from the batch residuals
    b = len(pairs)
    nbar = total_n / b
    s2 = math.fsum((d - p * n) ** 2 for d, n in pairs) / (b - 1)
    var_batch = s2 / (b * nbar * nbar)
    var_iid = p * (1.0 - p) / total_n
    return max(1.0, var_batch / var_iid)


def traffic_intensity(classes: Iterable) -> float:
    """Aggregate offered load in Erlangs, sum of rate x mean hold."""
    return math.fsum(c.arrival_rate * c.hold_law.mean for c in classes)


def free_port_trajectory(events: Iterable, plan: PartitionPlan, interval: float, horizon: float) -> list[tuple[float, int]]:
    """Free ports sampled at ``0, interval, 2*interval, ... <= horizon``.

    ``events`` are time-ordered records with ``kind`` and ``partition``
    attributes; an arrival with a partition takes a port, a departure frees
    one, and a denied arrival (partition None) changes nothing. Each sample
    reflects every event at or before its time.
    """
    if not interval > 0:
        raise ValueError("interval must be positive")
    free = plan.total
    n_samples = int(math.floor(horizon / interval + 1e-9)) + 1
    series: list[tuple[float, int]] = []
    for ev in events:
        while len(series) < n_samples and len(series) * interval < ev.time:
            series.append((len(series) * interval, free))
        if ev.partition is None:
            continue
        free += -1 if ev.kind == "arrival" else 1
        if not 0 <= free <= plan.total:
            raise ValueError(f"inconsistent event stream: {free} free ports at t={ev.time}")
    while len(series) < n_samples:
        series.append((len(series) * interval, free))
    return series


@dataclass
class ClassStats:
    class_id: int
    offered: int
    admitted: int
    denied: int
    home_blocked: int
    erlangs: float
    blocking: BlockingEstimate | None
    home_blocking: BlockingEstimate | None
    analytic_blocking: float
    popular_requests: int | None = None


@dataclass
class PartitionStats:
    partition: int
    capacity: int
    attempts: int
    blocked: int
    admitted: int
    mean_occupancy: float
    fraction_full: float
    home_erlangs: float
    analytic_blocking: float
    paper_literal_erlangs: float | None


@dataclass
class MetricsReport:
    scenario_id: str
    seed: int
    horizon: float
    warmup: float
    cascade_policy: str
    capacity: int
    classes: list[ClassStats]
    partitions: list[PartitionStats]
    offered: int
    admitted: int
    denied: int
    blocking: BlockingEstimate | None
    blocking_inflation: float
    traffic_intensity: float
    mean_free_ports: float
    free_port_series: list[tuple[float, int]]
    final_occupancy: list[int]
    analytic: dict
    events: list | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("events")
        d["free_port_series"] = [list(p) for p in self.free_port_series]
        return d

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def csv_rows(self) -> list[dict]:
        """One row per class, one aggregate row (``all``) and one row per
        partition (``p<j>``, counting probes of that partition)."""
        rows = []
        for c in self.classes:
            rows.append(_row(self.scenario_id, str(c.class_id), c.offered, c.admitted, c.denied, c.blocking, c.erlangs, c.analytic_blocking))
        rows.append(
            _row(self.scenario_id, "all", self.offered, self.admitted, self.denied, self.blocking, self.traffic_intensity, self.analytic["overall_denial"])
        )
        for p in self.partitions:
            est = blocking_estimate(p.blocked, p.attempts)
            rows.append(_row(self.scenario_id, f"p{p.partition}", p.attempts, p.admitted, p.blocked, est, p.home_erlangs, p.analytic_blocking))
        return rows

    def to_csv(self) -> str:
        return rows_to_csv(self.csv_rows())


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _row(scenario_id, class_id, offered, admitted, denied, est, erlangs, analytic) -> dict:
    return {
        "scenario_id": scenario_id,
        "class_id": class_id,
        "offered": offered,
        "admitted": admitted,
        "denied": denied,
        "blocking": _fmt(est.estimate if est else None),
        "ci_low": _fmt(est.ci_low if est else None),
        "ci_high": _fmt(est.ci_high if est else None),
        "erlangs": _fmt(erlangs),
        "analytic_blocking": _fmt(analytic),
    }


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def build_report(
    scenario,
    *,
    offered,
    admitted,
    denied,
    home_blocked,
    popular,
    part_blocked,
    part_admitted,
    occupancy_area,
    full_time,
    free_port_series,
    batch_offered,
    batch_denied,
    batch_home_blocked,
    final_occupancy,
    events=None,
) -> MetricsReport:
    plan = scenario.plan
    k = plan.k
    window = scenario.horizon - scenario.warmup
    loads = [c.erlangs for c in scenario.classes]
    partition_b = [erlang_b(loads[j], plan.capacities[j]) for j in range(k)]

    def denial(home: int) -> float:
        p = 1.0
        for j in scenario.scan_order(home):
            p *= partition_b[j - 1]
        return p

    classes = []
    for j, c in enumerate(scenario.classes):
        classes.append(
            ClassStats(
                class_id=c.class_id,
                offered=offered[j],
                admitted=admitted[j],
                denied=denied[j],
                home_blocked=home_blocked[j],
                erlangs=loads[j],
                blocking=blocking_estimate(denied[j], offered[j], batch_inflation(batch_denied[j], batch_offered[j])),
                home_blocking=blocking_estimate(home_blocked[j], offered[j], batch_inflation(batch_home_blocked[j], batch_offered[j])),
                analytic_blocking=denial(j + 1),
                popular_requests=None if popular is None else popular[j],
            )
        )

    partitions = []
    for j in range(k):
        busy = full_time[j]
        literal = None
        if busy > 0 and scenario.classes[j].arrival_rate > 0:
            literal = offered_load_paper_literal([scenario.classes[j].arrival_rate], [scenario.classes[j].mean_hold], busy)
        partitions.append(
            PartitionStats(
                partition=j + 1,
                capacity=plan.capacities[j],
                attempts=part_blocked[j] + part_admitted[j],
                blocked=part_blocked[j],
                admitted=part_admitted[j],
                mean_occupancy=occupancy_area[j] / window,
                fraction_full=full_time[j] / window,
                home_erlangs=loads[j],
                analytic_blocking=partition_b[j],
                paper_literal_erlangs=literal,
            )
        )

    total_offered = sum(offered)
    total_denied = sum(denied)
    inflation = batch_inflation([sum(col) for col in zip(*batch_denied)], [sum(col) for col in zip(*batch_offered)])
    weights = [o / total_offered for o in offered] if total_offered else [0.0] * k
    overall_denial = math.fsum(w * c.analytic_blocking for w, c in zip(weights, classes))

    return MetricsReport(
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        horizon=scenario.horizon,
        warmup=scenario.warmup,
        cascade_policy=scenario.cascade_policy,
        capacity=plan.total,
        classes=classes,
        partitions=partitions,
        offered=total_offered,
        admitted=sum(admitted),
        denied=total_denied,
        blocking=blocking_estimate(total_denied, total_offered, inflation),
        blocking_inflation=inflation,
        traffic_intensity=traffic_intensity(scenario.classes),
        mean_free_ports=plan.total - math.fsum(occupancy_area) / window,
        free_port_series=free_port_series,
        final_occupancy=final_occupancy,
        analytic={
            "load_form": "standard (rate x mean hold)",
            "independence_approximation": True,
            "partition_erlang_b": partition_b,
            "end_to_end_denial": [c.analytic_blocking for c in classes],
            "overall_denial": overall_denial,
            "paper_literal_erlangs": [p.paper_literal_erlangs for p in partitions],
            "paper_literal_note": "home load divided by measured time with every port of the partition busy",
        },
        events=events,
    )
