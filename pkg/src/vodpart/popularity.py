"""Zipf-like title popularity.

Title ``i`` (1-based) is requested with probability ``delta / i**alpha`` where
``delta`` is the exact normalizer over the whole catalog. The closed-form
``(M/N)**(1 - alpha)`` is only an asymptotic stand-in for the popular mass and
is exposed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ZipfPopularity:
    """Catalog of ``total_titles`` videos, the first ``popular_titles`` of
    which count as popular, with skew ``0 < skew < 1``."""

    total_titles: int
    popular_titles: int
    skew: float
    normalizer: float = field(init=False, repr=False)
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, m, a = self.total_titles, self.popular_titles, self.skew
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"total_titles must be a positive integer, got {n!r}")
        if not isinstance(m, (int, np.integer)) or not 1 <= m <= n:
            raise ValueError(f"popular_titles must satisfy 1 <= M <= N, got M={m!r}, N={n}")
        if not 0.0 < a < 1.0:
            raise ValueError(f"skew must lie strictly between 0 and 1, got {a!r}")
        weights = np.arange(1, n + 1, dtype=float) ** -a
        # fsum keeps the normalizer exact to the last ulp even for N ~ 1e6
        delta = 1.0 / math.fsum(weights)
        cdf = np.cumsum(weights * delta)
        cdf[-1] = 1.0
        object.__setattr__(self, "normalizer", delta)
        object.__setattr__(self, "_cdf", cdf)

    def pmf(self) -> np.ndarray:
        """Request probability of each title, index 0 holding title 1."""
        return self.normalizer * np.arange(1, self.total_titles + 1, dtype=float) ** -self.skew

    def is_popular(self, title: int) -> bool:
        return title <= self.popular_titles


def cumulative_popularity_exact(pop: ZipfPopularity) -> float:
    """Probability that a request hits one of the popular titles."""
    if pop.popular_titles == pop.total_titles:
        return 1.0
    i = np.arange(1, pop.popular_titles + 1, dtype=float)
    return min(1.0, pop.normalizer * math.fsum(i**-pop.skew))


def cumulative_popularity_approx(pop: ZipfPopularity) -> float:
    """Asymptotic popular mass ``(M/N)**(1 - alpha)``.

    This is not the exact sum; for N=1000, M=100, alpha=0.8 it overshoots
    the exact value by about 0.105.
    """
    return (pop.popular_titles / pop.total_titles) ** (1.0 - pop.skew)


def unpopular_request_probability(pop: ZipfPopularity) -> float:
    return 1.0 - cumulative_popularity_approx(pop)


def split_rate(rate: float, pop: ZipfPopularity) -> tuple[float, float]:
    """Thin a Poisson request stream into (popular, unpopular) rates.

    Optional class-assignment helper: each request is independently unpopular
    with probability ``unpopular_request_probability(pop)``, so both parts
    stay Poisson.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    p_un = unpopular_request_probability(pop)
    return rate * (1.0 - p_un), rate * p_un


def sample_title(pop: ZipfPopularity, rng: np.random.Generator, size: int | None = None):
    """Draw title indices in 1..N by inverse transform on the cumulative table.

    Returns an ``int`` when ``size`` is None, otherwise an integer array.
    """
    u = rng.random(size)
    idx = np.searchsorted(pop._cdf, u, side="right")
    # u < 1 and cdf[-1] == 1, so idx < N always; clip guards float edge cases
    idx = np.minimum(idx, pop.total_titles - 1) + 1
    if size is None:
        return int(idx)
    return idx.astype(np.int64)
