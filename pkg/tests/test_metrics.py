import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opboost import synthetic
from opboost.audit import exact_pmf
from opboost.domain import MappedDomain
from opboost.errors import DataError, SizeError, UndefinedMetricError
from opboost.mechanisms import MechanismSpec
from opboost.metrics import (
    SplitScenario,
    beta_monte_carlo,
    beta_split_probability,
    beta_theorem_sum,
    gamma_bound_global,
    gamma_bound_grr,
    gamma_bound_local,
    gamma_table,
    order_preserving_prob_exact,
    weighted_kendall,
)

LN2 = math.log(2)


def brute_kendall(r, s):
    n = len(r)
    rank = {i: sorted(range(n), key=lambda k: (r[k], k)).index(i) + 1 for i in range(n)}
    num = rr = ss = 0.0
    for i, j in itertools.combinations(range(n), 2):
        w = abs(rank[i] - rank[j])
        a, b = np.sign(r[i] - r[j]), np.sign(s[i] - s[j])
        num += w * a * b
        rr += w * a * a
        ss += w * b * b
    return num / math.sqrt(rr * ss)


def test_kendall_sentinels():
    r = np.arange(50) * 1.5
    assert weighted_kendall(r, r) == 1.0
    assert weighted_kendall(r, r[::-1]) == -1.0
    assert weighted_kendall([1, 2, 3], [1, 3, 2]) == pytest.approx(brute_kendall([1, 2, 3], [1, 3, 2]))
    assert weighted_kendall([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=3, max_size=30))
@settings(max_examples=80)
def test_kendall_matches_brute_force(pairs):
    r, s = map(list, zip(*pairs))
    if len(set(r)) < 2 or len(set(s)) < 2:
        with pytest.raises(UndefinedMetricError):
            weighted_kendall(r, s)
        return
    tau = weighted_kendall(r, s, block=7)
    assert -1 - 1e-12 <= tau <= 1 + 1e-12
    assert tau == pytest.approx(brute_kendall(r, s), abs=1e-12)


def test_kendall_custom_weight_and_guards():
    r = [3, 1, 2, 5]
    assert weighted_kendall(r, r, w=lambda i, j: np.ones(np.broadcast(i, j).shape)) == 1.0
    with pytest.raises(UndefinedMetricError):
        weighted_kendall([1, 1, 1], [1, 2, 3])
    with pytest.raises(DataError):
        weighted_kendall([1, 2], [1, 2, 3])
    with pytest.raises(SizeError):
        weighted_kendall(np.arange(50_001), np.arange(50_001))


def test_order_preserving_examples():
    assert order_preserving_prob_exact(MechanismSpec.global_map(MappedDomain(1, 10), 200), 4, 5) > 1 - 1e-6
    local = MechanismSpec.local_map(MappedDomain(1, 20, 5), 0.5)
    assert order_preserving_prob_exact(local, 5, 6) == 1.0
    spec = MechanismSpec.global_map(MappedDomain(1, 3), 2 * LN2)
    p1, p3 = exact_pmf(spec, 1).probs, exact_pmf(spec, 3).probs
    brute = sum(p1[a] * p3[b] for a in range(3) for b in range(3) if b > a)
    assert order_preserving_prob_exact(spec, 1, 3) == pytest.approx(brute, abs=1e-15)
    with pytest.raises(DataError):
        order_preserving_prob_exact(spec, 2, 2)


def test_gamma_global_behaviour():
    vals = [gamma_bound_global(t, 1.0, 100) for t in range(20, 91)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.999
    assert gamma_bound_global(1, 200, 100) > 1 - 1e-6


@pytest.mark.parametrize("t, table", [(5, 0.4950), (95, 0.4960)])
def test_gamma_grr_table_values(t, table):
    assert gamma_bound_grr(t, 0.1, 100) == pytest.approx(table, abs=1e-4)


def test_gamma_local_cross_partition_is_one():
    assert gamma_bound_local(15, 0.05, 10) == 1.0
    ts, rows = gamma_table()
    local = dict(rows)["Local-map"]
    assert all(v == 1.0 for t, v in zip(ts, local) if t >= 10)


def _scenario(values, split, spec):
    return SplitScenario(np.asarray(values), split, spec)


def test_beta_noiseless_and_quantile_effect(rng):
    d = MappedDomain(1, 10)
    sc = _scenario([1, 3, 4, 6, 9], 4, MechanismSpec.global_map(d, 200))
    assert beta_split_probability(sc) > 1 - 1e-6
    values = np.arange(1, 11)
    spec = MechanismSpec.global_map(d, 1.0)
    assert beta_split_probability(_scenario(values, 3, spec)) > beta_split_probability(_scenario(values, 5, spec))


def test_beta_monte_carlo_small(rng):
    spec = MechanismSpec.adj_map(MappedDomain(1, 12, 3), 2.0)
    sc = _scenario([2, 4, 5, 8, 9, 11], 5, spec)
    exact = beta_split_probability(sc)
    mc, se = beta_monte_carlo(sc, 200_000, rng)
    assert abs(mc - exact) <= 3 * se


def test_theorem_sums_bracket_exact_beta():
    spec = MechanismSpec.global_map(MappedDomain(1, 10), 0.8)
    sc = _scenario([1, 2, 2, 5, 7, 8], 2, spec)
    exact = beta_split_probability(sc)
    assert beta_theorem_sum(sc, strict=True) <= exact + 1e-12
    assert exact <= beta_theorem_sum(sc) + 1e-12


def test_beta_rejects_large_scenarios():
    spec = MechanismSpec.global_map(MappedDomain(1, 30), 1.0)
    with pytest.raises(SizeError):
        beta_split_probability(_scenario(np.arange(1, 27), 10, spec))


@pytest.mark.parametrize("gen", [synthetic.uniform_values, synthetic.normal_values])
def test_proposed_beat_grr_on_beta(gen):
    d = MappedDomain(1, 30, 5)
    values = np.sort(gen(8, d, np.random.default_rng(3)))
    split = int(values[3])
    grr = beta_split_probability(_scenario(values, split, MechanismSpec.grr(d, 1.0)))
    for spec in (MechanismSpec.global_map(d, 1.0), MechanismSpec.adj_map(d, 1.0), MechanismSpec.local_map(d, 1.0)):
        assert beta_split_probability(_scenario(values, split, spec)) >= grr
