"""Range-count queries as an order-sensitive utility measure.

A query ``[lo, hi]`` asks what fraction of the values falls inside it.  The
error of a desensitized column is the mean squared difference between its
answers and those of the true column over a batch of random queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import MappedDomain
from .errors import DataError

DEFAULT_QUERY_COUNT = 10_000


@dataclass(frozen=True)
class QuerySet:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64)
        hi = np.asarray(self.hi, dtype=np.int64)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise DataError("query endpoints must be equal-length non-empty 1-d arrays")
        if np.any(lo > hi):
            raise DataError("every query needs lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def count(self) -> int:
        return int(self.lo.size)

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return list(zip(self.lo.tolist(), self.hi.tolist()))

    @classmethod
    def from_ranges(cls, ranges) -> "QuerySet":
        arr = np.asarray(list(ranges), dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


def generate_queries(domain: MappedDomain, count: int = DEFAULT_QUERY_COUNT, rng=None) -> QuerySet:
    """Two uniform endpoints per query, sorted so that ``lo <= hi``."""
    if count < 1:
        raise DataError("count must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()
    ends = rng.integers(domain.L, domain.R + 1, size=(count, 2))
    ends.sort(axis=1)
    return QuerySet(ends[:, 0], ends[:, 1])


def range_frequencies(values, queries: QuerySet) -> np.ndarray:
    """Fraction of ``values`` inside each query, via a sorted search."""
    v = np.sort(np.asarray(values))
    if v.size == 0:
        raise DataError("need at least one value")
    inside = np.searchsorted(v, queries.hi, side="right") - np.searchsorted(v, queries.lo, side="left")
    return inside / v.size


def range_query_mse(true_values, desensitized_values, queries: QuerySet) -> float:
    t = np.asarray(true_values)
    d = np.asarray(desensitized_values)
    if t.size == 0 or t.shape != d.shape:
        raise DataError("need equal-length non-empty value sequences")
    diff = range_frequencies(t, queries) - range_frequencies(d, queries)
    return float(np.mean(diff * diff))
