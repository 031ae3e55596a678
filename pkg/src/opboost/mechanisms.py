"""Order-preserving desensitization mechanisms.

Four mechanisms act on integers in a :class:`~opboost.domain.MappedDomain`:

* Global-map: an exponential-style mechanism over the whole domain, output
  ``i`` with weight ``exp(-|x - i| * eps / 2)``.  Satisfies eps-dLDP.
* Adj-map: first picks a partition with Global-map over partition indices
  (budget ``eps_prt``), then an output inside that partition with Global-map
  restricted to it (budget ``eps_ner``).  Satisfies partition-dLDP.
* Local-map: Adj-map with the partition fixed to the input's own partition.
  Values in different partitions are *distinguishable*: there is no
  cross-partition guarantee of any kind, only the within-partition
  eps_ner-dLDP bound.
* GRR: generalized randomized response, the categorical LDP baseline.

Every mechanism can sample either by inverse CDF over its explicit PMF
(``Sampler.EXACT``, cost linear in the domain) or from a bounded discrete
Laplace distribution with scale ``2/eps`` (``Sampler.BDLAP``, constant
expected cost).  Randomness always comes from an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import MappedDomain
from .errors import ConfigError, DataError, DomainRangeError

EXACT_DOMAIN_LIMIT = 4096
MAX_RETRIES = 1000


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """Seeded generator; identical seeds give identical draw sequences."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over the integers ``lo .. lo + len(probs) - 1``."""

    lo: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DataError("pmf needs a non-empty 1-d probability vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise DataError(f"not a probability vector (sum={p.sum()!r})")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "lo", int(self.lo))

    @property
    def hi(self) -> int:
        return self.lo + self.probs.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def __len__(self):
        return self.probs.size

    def prob(self, o: int) -> float:
        if o < self.lo or o > self.hi:
            return 0.0
        return float(self.probs[o - self.lo])

    def on(self, lo: int, hi: int) -> np.ndarray:
        """Probabilities re-indexed onto ``[lo, hi]`` (zero outside the support)."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.probs[a - self.lo : b - self.lo + 1]
        return out

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def sample(self, rng: np.random.Generator, size=None):
        c = self.cdf()
        u = rng.random(size) * c[-1]
        idx = np.minimum(np.searchsorted(c, u, side="right"), c.size - 1)
        return self.lo + idx


class Kind(str, enum.Enum):
    GLOBAL = "global"
    ADJ = "adj"
    LOCAL = "local"
    GRR = "grr"


class Sampler(str, enum.Enum):
    EXACT = "exact"
    BDLAP = "bdlap"


@dataclass(frozen=True)
class BudgetSplit:
    epsilon: float
    alpha: float
    theta: int
    domain_size: int
    epsilon_prt: float
    epsilon_ner: float


def _positive(**kw):
    for name, v in kw.items():
        if not (v > 0) or not math.isfinite(v):
            raise ConfigError(f"{name} must be a positive finite number, got {v!r}")


def split_budget(epsilon: float, alpha: float, theta: int, domain_size: int) -> BudgetSplit:
    """Split a dLDP budget into (eps_prt, eps_ner) with eps_prt = alpha*theta*eps_ner.

    ``alpha = 1`` is the split under which Adj-map closely tracks Global-map
    at the same ``epsilon``.
    """
    _positive(epsilon=epsilon, alpha=alpha, theta=theta, domain_size=domain_size)
    eps_ner = epsilon / (alpha + theta / domain_size)
    return BudgetSplit(epsilon, alpha, int(theta), int(domain_size), alpha * theta * eps_ner, eps_ner)


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism plus its parameters.

    ``epsilon`` is the whole-domain budget for Global-map and GRR.  Adj-map and
    Local-map use ``budget``; Local-map ignores ``budget.epsilon_prt``.
    """

    kind: Kind
    domain: MappedDomain
    epsilon: float
    budget: Optional[BudgetSplit] = None
    sampler: Optional[Sampler] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in (Kind.ADJ, Kind.LOCAL):
            if self.budget is None:
                raise ConfigError(f"{self.kind.value} needs a budget split")
            if self.budget.theta != self.domain.theta:
                raise ConfigError("budget theta and domain theta disagree")
        elif self.kind is Kind.GRR:
            if not (self.epsilon >= 0) or not math.isfinite(self.epsilon):
                raise ConfigError("GRR epsilon must be finite and non-negative")
        else:
            _positive(epsilon=self.epsilon)
        if self.sampler is None:
            auto = Sampler.EXACT if self.domain.size <= EXACT_DOMAIN_LIMIT else Sampler.BDLAP
            object.__setattr__(self, "sampler", auto)
        else:
            object.__setattr__(self, "sampler", Sampler(self.sampler))
        if self.kind is Kind.GRR and self.sampler is Sampler.BDLAP:
            raise ConfigError("GRR has no discrete Laplace variant")

    @classmethod
    def global_map(cls, domain, epsilon, sampler=None):
        return cls(Kind.GLOBAL, domain, epsilon, sampler=sampler)

    @classmethod
    def grr(cls, domain, epsilon):
        return cls(Kind.GRR, domain, epsilon)

    @classmethod
    def adj_map(cls, domain, epsilon, alpha=1.0, sampler=None, budget=None):
        budget = budget or split_budget(epsilon, alpha, domain.theta, domain.size)
        return cls(Kind.ADJ, domain, budget.epsilon, budget, sampler)

    @classmethod
    def local_map(cls, domain, epsilon, alpha=1.0, sampler=None, budget=None):
        budget = budget or split_budget(epsilon, alpha, domain.theta, domain.size)
        return cls(Kind.LOCAL, domain, budget.epsilon, budget, sampler)

    @property
    def label(self) -> str:
        if self.kind in (Kind.ADJ, Kind.LOCAL):
            return f"{self.kind.value}(alpha={self.budget.alpha:g},theta={self.domain.theta})"
        return self.kind.value


# -- exponential (exact) building blocks ------------------------------------


def _exp_probs(center, eps, a, b) -> np.ndarray:
    # center may lie outside [a, b] (inner step of Adj-map)
    i = np.arange(a, b + 1)
    d = np.abs(i - center)
    w = np.exp(-(d - d.min()) * (eps / 2.0))
    return w / w.sum()


def global_map_pmf(x: int, epsilon: float, range: tuple[int, int]) -> Pmf:
    a, b = range
    if not a <= x <= b:
        raise DomainRangeError(f"{x} outside [{a}, {b}]")
    _positive(epsilon=epsilon)
    return Pmf(a, _exp_probs(x, epsilon, a, b))


def adj_map_partition_pmf(x: int, epsilon_prt: float, domain: MappedDomain) -> Pmf:
    """Distribution of the partition index chosen by Adj-map's first stage."""
    domain.check(x)
    _positive(epsilon_prt=epsilon_prt)
    return Pmf(1, _exp_probs(domain.partition_of(x), epsilon_prt, 1, domain.k))


def grr_probs(epsilon: float, domain_size: int) -> tuple[float, float]:
    """(p_keep, p_other) for randomized response over ``domain_size`` values."""
    # e^eps / (d + e^eps - 1) rewritten to stay finite for large eps
    p1 = 1.0 / (1.0 + (domain_size - 1) * math.exp(-epsilon))
    p2 = math.exp(-epsilon) * p1
    return p1, p2


# -- discrete Laplace --------------------------------------------------------


def dlap_pmf_value(z, lam: float):
    """Unbounded discrete Laplace mass ``(e^{1/lam}-1)/(e^{1/lam}+1) e^{-|z|/lam}``."""
    return math.tanh(0.5 / lam) * np.exp(-np.abs(z) / lam)


def dlap_sample(lam: float, rng: np.random.Generator, size=None):
    """Discrete Laplace draw as the difference of two i.i.d. geometric variables."""
    _positive(lam=lam)
    p = -math.expm1(-1.0 / lam)
    return rng.geometric(p, size) - rng.geometric(p, size)


def bounded_dlap_pmf(lam: float, l: int, u: int) -> Pmf:
    """Discrete Laplace restricted (by rejection) to ``[l, u]``.

    Written in a shifted form so that windows far from zero do not underflow.
    """
    if l > u:
        raise DataError(f"empty window [{l}, {u}]")
    _positive(lam=lam)
    z = np.arange(l, u + 1)
    one_minus_r = -math.expm1(-1.0 / lam)
    if u < 0:
        w = np.exp(-(u - z) / lam)
        norm = -math.expm1(-(u - l + 1) / lam)
    elif l > 0:
        w = np.exp(-(z - l) / lam)
        norm = -math.expm1(-(u - l + 1) / lam)
    else:
        w = np.exp(-np.abs(z) / lam)
        norm = 1.0 + math.exp(-1.0 / lam) - math.exp(-(1 - l) / lam) - math.exp(-(u + 1) / lam)
    return Pmf(l, w * (one_minus_r / norm))


def _bdlap_many(centers, lam, lo, hi, rng, max_retries=MAX_RETRIES) -> np.ndarray:
    centers = np.asarray(centers, dtype=np.int64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.int64), centers.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.int64), centers.shape)
    out = np.empty_like(centers)
    pending = np.arange(centers.size)
    for _ in range(max_retries):
        if pending.size == 0:
            return out
        draw = centers[pending] + dlap_sample(lam, rng, pending.size)
        ok = (draw >= lo[pending]) & (draw <= hi[pending])
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    # rejection kept failing: draw from the identical exact distribution instead
    for i in pending:
        c = int(centers[i])
        out[i] = c + bounded_dlap_pmf(lam, int(lo[i]) - c, int(hi[i]) - c).sample(rng)
    return out


def bounded_dlap_sample(center: int, lam: float, l: int, u: int, rng, size=None, max_retries=MAX_RETRIES):
    """``center + Z`` with Z discrete Laplace, resampled until it lands in ``[l, u]``.

    Returns an int, or an array of ``size`` independent draws.
    """
    if l > u:
        raise DataError(f"empty window [{l}, {u}]")
    _positive(lam=lam)
    if size is None:
        return int(_bdlap_many([center], lam, l, u, rng, max_retries)[0])
    return _bdlap_many(np.full(size, center), lam, l, u, rng, max_retries)


# -- batch desensitization ---------------------------------------------------


def _exp_many(centers, eps, lo, hi, rng) -> np.ndarray:
    """Inverse-CDF sampling, grouping identical (center, lo, hi) triples."""
    centers = np.asarray(centers, dtype=np.int64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.int64), centers.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.int64), centers.shape)
    out = np.empty_like(centers)
    u = rng.random(centers.size)
    keys = np.stack([centers, lo, hi], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    groups = np.split(order, np.cumsum(np.bincount(inverse, minlength=len(uniq)))[:-1])
    for (c, a, b), idx in zip(uniq, groups):
        cdf = np.cumsum(_exp_probs(c, eps, a, b))
        pos = np.searchsorted(cdf, u[idx] * cdf[-1], side="right")
        out[idx] = a + np.minimum(pos, b - a)
    return out


def desensitize(values, spec: MechanismSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply the mechanism independently to every value in ``values``."""
    x = np.asarray(values, dtype=np.int64)
    d = spec.domain
    if x.size == 0:
        return x.copy()
    if x.min() < d.L or x.max() > d.R:
        raise DomainRangeError(f"values outside domain [{d.L}, {d.R}]")
    bd = spec.sampler is Sampler.BDLAP

    if spec.kind is Kind.GRR:
        p1, _ = grr_probs(spec.epsilon, d.size)
        keep = rng.random(x.size) < p1
        r = rng.integers(0, d.size - 1, x.size)
        other = d.L + r + (r >= x - d.L)
        return np.where(keep, x, other)

    if spec.kind is Kind.GLOBAL:
        if bd:
            return _bdlap_many(x, 2.0 / spec.epsilon, d.L, d.R, rng)
        return _exp_many(x, spec.epsilon, d.L, d.R, rng)

    b = spec.budget
    m = d.partition_of(x)
    if spec.kind is Kind.ADJ:
        if bd:
            m = _bdlap_many(m, 2.0 / b.epsilon_prt, 1, d.k, rng)
        else:
            m = _exp_many(m, b.epsilon_prt, 1, d.k, rng)
    lo = d.L + (m - 1) * d.theta
    hi = np.minimum(lo + d.theta - 1, d.R)
    if bd:
        return _bdlap_many(x, 2.0 / b.epsilon_ner, lo, hi, rng)
    return _exp_many(x, b.epsilon_ner, lo, hi, rng)


def _one(x, spec, rng) -> int:
    spec.domain.check(x)
    return int(desensitize([x], spec, rng)[0])


def global_map(x: int, epsilon: float, domain: MappedDomain, rng, sampler=Sampler.EXACT) -> int:
    return _one(x, MechanismSpec.global_map(domain, epsilon, sampler), rng)


def adj_map(x: int, budget: BudgetSplit, domain: MappedDomain, rng, sampler=Sampler.EXACT) -> int:
    return _one(x, MechanismSpec.adj_map(domain, budget.epsilon, sampler=sampler, budget=budget), rng)


def local_map(x: int, epsilon_ner: float, domain: MappedDomain, rng, sampler=Sampler.EXACT) -> int:
    _positive(epsilon_ner=epsilon_ner)
    budget = BudgetSplit(epsilon_ner, 1.0, domain.theta, domain.size, domain.theta * epsilon_ner, epsilon_ner)
    return _one(x, MechanismSpec.local_map(domain, epsilon_ner, sampler=sampler, budget=budget), rng)


def grr(x: int, epsilon: float, domain: MappedDomain, rng) -> int:
    return _one(x, MechanismSpec.grr(domain, epsilon), rng)
