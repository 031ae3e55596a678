"""Order-preservation and split-utility metrics.

Covers the weighted Kendall coefficient, exact order-preserving
probabilities, closed-form lower bounds on those probabilities (``gamma``)
and the probability ``beta`` that desensitization moves no value across a
split point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .audit import exact_pmf
from .domain import ordinalize
from .errors import DataError, SizeError, UndefinedMetricError
from .mechanisms import MechanismSpec, Pmf, desensitize, grr_probs, split_budget

KENDALL_MAX_N = 50_000
BETA_MAX_VALUES = 25


# -- weighted Kendall --------------------------------------------------------


def _sgn_block(v, rows, cols):
    return np.sign(v[rows][:, None] - v[cols][None, :])


def weighted_kendall(r, s, w: Optional[Callable] = None, block: int = 2048) -> float:
    """Weighted Kendall tau ``<r,s>_w / sqrt(<r,r>_w <s,s>_w)``.

    ``w(i, j)`` receives broadcastable index arrays and returns pair weights.
    The default weight is the distance between the ordinal positions of
    ``r[i]`` and ``r[j]`` once ``r`` is sorted.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if r.shape != s.shape or r.ndim != 1 or r.size < 2:
        raise DataError("need two equal-length sequences of at least 2 values")
    n = r.size
    if n > KENDALL_MAX_N:
        raise SizeError(f"weighted_kendall limited to n <= {KENDALL_MAX_N}")
    if w is None:
        rank = ordinalize(r).astype(float)
        w = lambda i, j: np.abs(rank[i] - rank[j])  # noqa: E731
    rs = rr = ss = 0.0
    idx = np.arange(n)
    for start in range(0, n, block):
        rows = idx[start : start + block]
        cols = idx[start:]
        upper = rows[:, None] < cols[None, :]
        wt = np.where(upper, w(rows[:, None], cols[None, :]), 0.0)
        a = _sgn_block(r, rows, cols)
        b = _sgn_block(s, rows, cols)
        rs += float(np.sum(a * b * wt))
        rr += float(np.sum(a * a * wt))
        ss += float(np.sum(b * b * wt))
    if rr <= 0 or ss <= 0:
        raise UndefinedMetricError("weighted Kendall undefined for constant input")
    # equal norms (always the case for identical or reversed orders) skip the
    # square root so the sentinels come out exact
    denom = rr if rr == ss else math.sqrt(rr) * math.sqrt(ss)
    return min(1.0, max(-1.0, rs / denom))


# -- order-preserving probability --------------------------------------------


def order_preserving_prob(p_low: Pmf, p_high: Pmf) -> float:
    """``Pr[o_high > o_low]`` for independent outputs; ties count as failures."""
    lo = min(p_low.lo, p_high.lo)
    hi = max(p_low.hi, p_high.hi)
    a = p_low.on(lo, hi)
    F_high = np.cumsum(p_high.on(lo, hi))
    # complement keeps disjoint ordered supports at exactly 1.0
    return 1.0 - float(np.dot(a, F_high))


def order_preserving_prob_exact(spec: MechanismSpec, x1: int, x2: int) -> float:
    if not x1 < x2:
        raise DataError(f"need x1 < x2, got {x1}, {x2}")
    return order_preserving_prob(exact_pmf(spec, x1), exact_pmf(spec, x2))


def gamma_bound_global(t: int, epsilon: float, domain_size: int) -> float:
    q = math.exp(-epsilon / 2)
    den = (1 + q - q ** (t + 1) - q ** (domain_size - t)) * (1 + q)
    return 1 - ((1 - q * q) * t + 1) / den * q**t


def gamma_grr(t: int, epsilon: float, domain_size: int) -> float:
    """Exact order-preserving probability of GRR for a pair at distance ``t``."""
    p1, p2 = grr_probs(epsilon, domain_size)
    d = domain_size
    return p1 * p1 + p1 * p2 * (d - 3) + p2 * p2 * (0.5 * d * (d - 3) + 2) + p2 * (p1 - p2) * t


gamma_bound_grr = gamma_grr


def gamma_bound_adj(t: int, epsilon_prt: float, theta: int, k: int) -> float:
    q = math.exp(-epsilon_prt / 2)
    T = t // theta
    cross = ((1 - q * q) * T + 1) / ((1 + q - q ** (T + 1) - q ** (k - T)) * (1 + q))
    same = (1 - q) ** 2 * (T + 1) / (2 * (1 + q) ** 2)
    return 1 - q**T * (cross - same)


def gamma_bound_local(t: int, epsilon_ner: float, theta: int) -> float:
    """1 once a pair must straddle partitions, else the Global-map bound on one partition."""
    if t >= theta:
        return 1.0
    return gamma_bound_global(t, epsilon_ner, theta)


def gamma_table(domain_size=100, theta=10, epsilon=0.1, alphas=(0.2, 0.5, 1, 2, 5), ts=None):
    """Rows of closed-form gamma values, one per mechanism, keyed by ``t``.

    Partition distance ``dist`` between the pair maps to ``t = 10*dist + 5``
    at the default layout.
    """
    ts = ts or [theta * dist + theta // 2 for dist in range(math.ceil(domain_size / theta))]
    k = math.ceil(domain_size / theta)
    rows = [("GRR(eps)", [gamma_grr(t, epsilon, domain_size) for t in ts])]
    rows.append(("GRR(theta*eps)", [gamma_grr(t, theta * epsilon, domain_size) for t in ts]))
    ner_local = split_budget(epsilon, 1.0, theta, domain_size).epsilon_ner
    rows.append(("Local-map", [gamma_bound_local(t, ner_local, theta) for t in ts]))
    for a in alphas:
        b = split_budget(epsilon, a, theta, domain_size)
        rows.append((f"Adj-map(alpha={a:g})", [gamma_bound_adj(t, b.epsilon_prt, theta, k) for t in ts]))
    return ts, rows


# -- beta: no value crosses the split ----------------------------------------


@dataclass(frozen=True)
class SplitScenario:
    values: np.ndarray
    split_point: int
    mechanism: MechanismSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        d = self.mechanism.domain
        if v.size == 0 or v.min() < d.L or v.max() > d.R:
            raise DataError("scenario values must be non-empty and inside the domain")
        d.check(self.split_point)
        object.__setattr__(self, "values", v)

    @property
    def left(self) -> np.ndarray:
        return np.flatnonzero(self.values <= self.split_point)

    @property
    def right(self) -> np.ndarray:
        return np.flatnonzero(self.values > self.split_point)


def _cdf_table(scenario: SplitScenario):
    v = scenario.values
    if v.size > BETA_MAX_VALUES:
        raise SizeError(f"exact beta limited to {BETA_MAX_VALUES} values")
    d = scenario.mechanism.domain
    uniq = np.unique(v)
    P = {int(x): exact_pmf(scenario.mechanism, int(x)).probs for x in uniq}
    F = {x: np.cumsum(p) for x, p in P.items()}
    return d, P, F


def beta_split_probability(scenario: SplitScenario) -> float:
    """Exact probability that every desensitized left value stays strictly below every right one.

    Sums over the position ``x`` of the largest desensitized left value:
    ``Pr[max left = x] * Pr[all right > x]``.  Ties at the left maximum are
    counted once, so this is the probability of the crossing-free event.
    """
    d, P, F = _cdf_table(scenario)
    left = scenario.values[scenario.left]
    right = scenario.values[scenario.right]
    if left.size == 0 or right.size == 0:
        return 1.0
    F_left = np.prod([F[int(x)] for x in left], axis=0)
    F_left_prev = np.concatenate([[0.0], F_left[:-1]])
    survive_right = np.prod([1.0 - F[int(x)] for x in right], axis=0)
    return float(np.clip(np.dot(F_left - F_left_prev, survive_right), 0.0, 1.0))


def beta_theorem_sum(scenario: SplitScenario, strict: bool = False) -> float:
    """The per-value sum: some left value lands on ``x``, the other left values
    at or below ``x`` (strictly below when ``strict``), right values above.

    The inclusive form counts ties at the maximum several times and bounds the
    exact probability from above; the strict form ignores ties and bounds it
    from below.
    """
    d, P, F = _cdf_table(scenario)
    left = [int(x) for x in scenario.values[scenario.left]]
    right = [int(x) for x in scenario.values[scenario.right]]
    if not left or not right:
        return 1.0
    survive_right = np.prod([1.0 - F[x] for x in right], axis=0)
    total = 0.0
    for i, k in enumerate(left):
        others = np.ones(d.size)
        for j, x in enumerate(left):
            if j != i:
                Fx = F[x]
                others = others * (np.concatenate([[0.0], Fx[:-1]]) if strict else Fx)
        total += float(np.sum(P[k] * others * survive_right))
    return total


def crossing_free(desensitized_left: np.ndarray, desensitized_right: np.ndarray) -> np.ndarray:
    """Row-wise test that max(left) < min(right) for batches of trials."""
    return desensitized_left.max(axis=-1) < desensitized_right.min(axis=-1)


def beta_monte_carlo(scenario: SplitScenario, trials: int, rng, batch: int = 100_000) -> tuple[float, float]:
    """Estimate ``beta`` by repeated desensitization; returns (estimate, std error)."""
    v = scenario.values
    li, ri = scenario.left, scenario.right
    hits = 0
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        out = desensitize(np.tile(v, m), scenario.mechanism, rng).reshape(m, v.size)
        hits += int(crossing_free(out[:, li], out[:, ri]).sum())
        done += m
    p = hits / trials
    return p, math.sqrt(max(p * (1 - p), 1e-300) / trials)
