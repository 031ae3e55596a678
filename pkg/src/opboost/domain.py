"""Mapping raw feature values into the unified discrete domain.

All features are mapped onto one integer interval ``[L, R]`` so that a single
distance unit (and therefore a single privacy parameter) applies to every
feature.  The interval is cut into partitions of length ``theta``; when
``theta`` does not divide the domain size the last partition is shorter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, DomainRangeError


@dataclass(frozen=True)
class MappedDomain:
    """Inclusive integer domain ``[L, R]`` with a partition layout."""

    L: int
    R: int
    theta: int = 1

    def __post_init__(self):
        if int(self.L) != self.L or int(self.R) != self.R:
            raise ConfigError("domain bounds must be integers")
        if not self.L < self.R:
            raise ConfigError(f"need L < R, got L={self.L}, R={self.R}")
        if self.theta < 1 or self.theta > self.size:
            raise ConfigError(f"theta must be in [1, {self.size}], got {self.theta}")

    @property
    def size(self) -> int:
        return self.R - self.L + 1

    @property
    def k(self) -> int:
        return math.ceil(self.size / self.theta)

    def with_theta(self, theta: int) -> "MappedDomain":
        return MappedDomain(self.L, self.R, theta)

    def contains(self, x) -> bool:
        return self.L <= x <= self.R

    def check(self, x) -> None:
        if not self.contains(x):
            raise DomainRangeError(f"value {x} outside domain [{self.L}, {self.R}]")

    def partition_of(self, x):
        """1-based partition index of ``x`` (works elementwise on arrays)."""
        if np.ndim(x):
            return (np.asarray(x) - self.L) // self.theta + 1
        return int((x - self.L) // self.theta + 1)

    def partition_bounds(self, m: int) -> tuple[int, int]:
        if not 1 <= m <= self.k:
            raise DomainRangeError(f"partition {m} outside [1, {self.k}]")
        lo = self.L + (m - 1) * self.theta
        return lo, min(lo + self.theta - 1, self.R)

    def values(self) -> np.ndarray:
        return np.arange(self.L, self.R + 1)


@dataclass(frozen=True)
class RawFeature:
    """A raw numeric column with publicly declared bounds."""

    values: np.ndarray
    lower: float
    upper: float
    name: str = ""

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError(f"feature {self.name!r}: need lower < upper")
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DataError(f"feature {self.name!r}: non-finite values")
        if v.size and (v.min() < self.lower or v.max() > self.upper):
            raise DomainRangeError(
                f"feature {self.name!r}: values must lie in [{self.lower}, {self.upper}]"
            )
        object.__setattr__(self, "values", v)


def map_values(x, lower: float, upper: float, domain: MappedDomain) -> np.ndarray:
    """Vectorised ``ceil(L + (x - lower)/(upper - lower) * (R - L))``."""
    if not lower < upper:
        raise ConfigError(f"need lower < upper, got ({lower}, {upper})")
    x = np.asarray(x, dtype=float)
    if np.any((x < lower) | (x > upper)) or not np.all(np.isfinite(x)):
        raise DomainRangeError(f"values outside declared bounds [{lower}, {upper}]")
    out = np.ceil(domain.L + (x - lower) / (upper - lower) * (domain.R - domain.L))
    return np.clip(out, domain.L, domain.R).astype(np.int64)


def map_value(x: float, feature_bounds: tuple[float, float], domain: MappedDomain) -> int:
    lower, upper = feature_bounds
    return int(map_values([x], lower, upper, domain)[0])


def ordinalize(values: Sequence[int]) -> np.ndarray:
    """1-based ranks with ties broken by original position.

    >>> ordinalize([4, 4, 1]).tolist()
    [2, 3, 1]
    """
    v = np.asarray(values)
    if v.size == 0:
        raise DataError("cannot ordinalize an empty sequence")
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(1, v.size + 1)
    return ranks
