"""Closed-form teletraffic quantities for a completely partitioned server.

Partition indices are 1-based throughout to match the usual j = 1..k
numbering; lists passed in are ordinary 0-based Python sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Integral
from typing import Sequence


@dataclass(frozen=True)
class PartitionPlan:
    """Total port capacity split into ``k`` disjoint partitions."""

    capacities: tuple[int, ...]

    def __post_init__(self):
        caps = tuple(self.capacities)
        if not caps:
            raise ValueError("a partition plan needs at least one partition")
        for c in caps:
            if not isinstance(c, Integral) or isinstance(c, bool) or c < 1:
                raise ValueError(f"partition capacities must be positive integers, got {c!r}")
        object.__setattr__(self, "capacities", tuple(int(c) for c in caps))

    @classmethod
    def uniform(cls, k: int, ports: int) -> PartitionPlan:
        return cls((ports,) * k)

    @property
    def k(self) -> int:
        return len(self.capacities)

    @property
    def total(self) -> int:
        return sum(self.capacities)

    def capacity(self, j: int) -> int:
        return self.capacities[j - 1]


@dataclass(frozen=True)
class OfferedLoad:
    """Per-class rates (req/s) and mean holds (s) feeding one partition."""

    rates: tuple[float, ...]
    holds: tuple[float, ...]
    busy_interval: float | None = None

    def __post_init__(self):
        if len(self.rates) != len(self.holds):
            raise ValueError("rates and holds must have equal length")
        if any(x < 0 for x in self.rates) or any(h < 0 for h in self.holds):
            raise ValueError("rates and holds must be nonnegative")
        if self.busy_interval is not None and self.busy_interval <= 0:
            raise ValueError("busy_interval must be positive")

    @property
    def erlangs(self) -> float:
        return offered_load_erlangs(self.rates, self.holds)

    @property
    def paper_literal_erlangs(self) -> float | None:
        if self.busy_interval is None:
            return None
        return offered_load_paper_literal(self.rates, self.holds, self.busy_interval)


@dataclass(frozen=True)
class OccupancyVector:
    """Occupied (not free) port count per partition."""

    occupied: tuple[int, ...]
    plan: PartitionPlan

    def __post_init__(self):
        if len(self.occupied) != self.plan.k:
            raise ValueError("occupancy length must equal the number of partitions")
        for q, c in zip(self.occupied, self.plan.capacities):
            if not 0 <= q <= c:
                raise ValueError(f"occupancy {q} outside [0, {c}]")

    def free(self, j: int) -> int:
        return self.plan.capacity(j) - self.occupied[j - 1]


def erlang_b(erlangs: float, ports: int) -> float:
    """Blocking probability of an M/G/c/c loss system.

    Uses B(0) = 1, B(j) = E*B(j-1) / (j + E*B(j-1)), which never forms
    factorials and so stays finite for any port count.

    >>> erlang_b(1.0, 1)
    0.5
    """
    if erlangs < 0 or math.isnan(erlangs):
        raise ValueError(f"offered load must be nonnegative, got {erlangs!r}")
    if not isinstance(ports, Integral) or isinstance(ports, bool):
        raise TypeError(f"port count must be an integer, got {ports!r}")
    if ports < 0:
        raise ValueError(f"port count must be nonnegative, got {ports}")
    b = 1.0
    for j in range(1, ports + 1):
        eb = erlangs * b
        b = eb / (j + eb)
    return b


def offered_load_erlangs(rates: Sequence[float], holds: Sequence[float]) -> float:
    """Sum of rate x mean hold over the contributing classes."""
    if len(rates) != len(holds):
        raise ValueError(f"got {len(rates)} rates but {len(holds)} holds")
    if any(x < 0 for x in rates) or any(h < 0 for h in holds):
        raise ValueError("rates and holds must be nonnegative")
    return math.fsum(lam * h for lam, h in zip(rates, holds))


def offered_load_paper_literal(rates: Sequence[float], holds: Sequence[float], busy_interval: float) -> float:
    """Load sum divided by a busy interval ``T``, kept verbatim for comparison.

    Not dimensionally an Erlang value; reports label it ``paper_literal``.
    """
    if not busy_interval > 0:
        raise ValueError(f"busy interval must be positive, got {busy_interval!r}")
    return offered_load_erlangs(rates, holds) / busy_interval


def routed_availability(j: int, k: int, ports: int, occupied: int) -> float:
    """Probability a request is dispatched past ``j - 1`` partitions to
    partition ``j`` and finds a free port there, under uniform 1/k dispatch."""
    if k < 1 or not 1 <= j <= k:
        raise ValueError(f"partition index {j} out of range 1..{k}")
    if ports < 1:
        raise ValueError("partition must have at least one port")
    if not 0 <= occupied <= ports:
        raise ValueError(f"occupied count {occupied} outside [0, {ports}]")
    return (1.0 - 1.0 / k) ** (j - 1) * (1.0 / k) * ((ports - occupied) / ports)


def cascade_block_probability(loads: Sequence[float], plan: PartitionPlan, start: int, stop: int) -> float:
    """Independence estimate that partitions ``start .. stop-1`` are all full.

    ``stop == start`` is the empty range and gives 1.
    """
    k = plan.k
    if len(loads) != k:
        raise ValueError(f"expected {k} loads, got {len(loads)}")
    if not 1 <= start <= stop <= k + 1:
        raise ValueError(f"range {start}..{stop - 1} not within 1..{k}")
    p = 1.0
    for m in range(start, stop):
        p *= erlang_b(loads[m - 1], plan.capacity(m))
    return p


def end_to_end_denial(loads: Sequence[float], plan: PartitionPlan, home: int) -> float:
    """Approximate denial probability for a class homed at ``home`` under
    forward-no-wrap overflow.

    Treats each partition as blocking independently with its own home load.
    Overflow traffic is peakier than Poisson, so this understates denial at
    the later partitions.
    """
    if not 1 <= home <= plan.k:
        raise ValueError(f"home partition {home} out of range 1..{plan.k}")
    return cascade_block_probability(loads, plan, home, plan.k + 1)
