import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from onosf.boolfn import BooleanFunction, constant, dictator, majority, parity, random_function
from onosf.core import BudgetExceeded, statistical_distance
from onosf.sources import (
    CrowdingAdversary,
    FunctionAdversary,
    GoodBlockModel,
    RandomAdversary,
    SourceSpec,
    TableAdversary,
    brute_force_bias,
    exact_expectation,
    make_block_function,
    monte_carlo_bias,
    online_extraction_error,
    optimal_online_bias,
    output_distribution,
    sample_source,
    worst_case_point_mass,
)


@st.composite
def small_instances(draw, max_bits=8):
    ell = draw(st.integers(1, 4))
    n = draw(st.integers(1, max(1, max_bits // ell)))
    bits = draw(st.lists(st.integers(0, 1), min_size=1 << (ell * n), max_size=1 << (ell * n)))
    bad = draw(st.sets(st.integers(1, ell), max_size=2))
    return np.array(bits), SourceSpec(ell, n, frozenset(bad))


def test_spec_validation_and_json():
    spec = SourceSpec(4, 2, frozenset({2, 4}))
    assert spec.g == 2 and spec.good_set == (1, 3)
    assert SourceSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ValueError):
        SourceSpec(3, 1, frozenset({4}))
    with pytest.raises(ValueError):
        SourceSpec.from_json({"ell": 3, "n": 1, "g": 3, "bad_set": [1]})


def test_sample_examples():
    assert len(sample_source(SourceSpec(5, 3), None, rng_seed=1)) == 5
    const = TableAdversary({1: np.array([5])})
    assert all(sample_source(SourceSpec(3, 3, frozenset({1})), const, rng_seed=s)[0] == 5 for s in range(10))
    copy = FunctionAdversary(lambda j, prefix: prefix[-1])
    spec = SourceSpec(3, 1, frozenset({3}))
    for s in range(20):
        x = sample_source(spec, copy, rng_seed=s)
        assert x[2] == x[1]
    assert sample_source(spec, copy, rng_seed=3) == sample_source(spec, copy, rng_seed=3)


def test_out_of_range_block_rejected():
    spec = SourceSpec(2, 2, frozenset({2}))
    with pytest.raises(ValueError):
        sample_source(spec, TableAdversary({2: np.array([9, 9, 9, 9])}))


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_online_causality(seed, n):
    # a bad block depends only on earlier blocks: changing later good blocks leaves it fixed
    spec = SourceSpec(4, n, frozenset({2}))
    adv = RandomAdversary(seed)
    rng = np.random.default_rng(seed)
    goods = {j: int(rng.integers(0, 1 << n)) for j in spec.good_set}
    from onosf.sources import realize

    a = realize(spec, adv, goods)
    b = realize(spec, adv, {**goods, 3: goods[3] ^ 1, 4: 0})
    assert a[:2] == b[:2]


def test_bias_examples():
    r = optimal_online_bias(majority(3), SourceSpec(3, 1, frozenset({3})))
    assert (r.max_e, r.oi_b) == (0.75, 0.25)
    r = optimal_online_bias(majority(3), SourceSpec(3, 1, frozenset({2, 3})))
    assert (r.max_e, r.oi_b) == (1.0, 0.5)
    for ell in (2, 3, 5):
        assert optimal_online_bias(parity(ell), SourceSpec(ell, 1, frozenset({ell}))).oi_b == 0.5


def test_brute_force_examples():
    assert brute_force_bias(constant(3, 1), SourceSpec(3, 1, frozenset({2}))) == (1.0, 1.0)
    hi, lo = brute_force_bias(dictator(2, 1), SourceSpec(2, 1, frozenset({1})))
    assert (hi, lo) == (1.0, 0.0)


def test_brute_force_budget():
    with pytest.raises(BudgetExceeded):
        brute_force_bias(parity(4), SourceSpec(4, 1, frozenset({4})), budget=10)


@given(small_instances())
def test_dp_matches_brute_force(inst):
    table, spec = inst
    r = optimal_online_bias(table, spec)
    try:
        hi, lo = brute_force_bias(table, spec, budget=5000)
    except BudgetExceeded:
        return
    assert (r.max_e, r.min_e) == pytest.approx((hi, lo), abs=1e-12)


@given(small_instances())
def test_policies_realize_dp_values(inst):
    table, spec = inst
    r = optimal_online_bias(table, spec)
    if not spec.bad_set:
        assert r.max_e == r.min_e == pytest.approx(table.mean())
        return
    assert exact_expectation(table, spec, r.max_policy) == pytest.approx(r.max_e, abs=1e-12)
    assert exact_expectation(table, spec, r.min_policy) == pytest.approx(r.min_e, abs=1e-12)


@given(st.integers(0, 10_000))
def test_monotone_in_coalition(seed):
    f = random_function(6, seed)
    rng = np.random.default_rng(seed)
    small = frozenset(int(b) for b in rng.choice(np.arange(1, 7), 2, replace=False))
    big = small | {int(rng.integers(1, 7))}
    a = optimal_online_bias(f, SourceSpec(6, 1, small)).oi_b
    b = optimal_online_bias(f, SourceSpec(6, 1, big)).oi_b
    assert a <= b + 1e-12


@given(st.integers(0, 10_000), st.integers(2, 7))
def test_single_bit_bias_is_half_online_influence(seed, ell):
    f = random_function(ell, seed)
    for i in range(1, ell + 1):
        r = optimal_online_bias(f, SourceSpec(ell, 1, frozenset({i})))
        assert r.oi_b == pytest.approx(f.online_influence(i) / 2, abs=1e-12)


@given(small_instances(max_bits=6))
def test_resilient_implies_extractor(inst):
    table, spec = inst
    if not spec.bad_set:
        return
    r = optimal_online_bias(table, spec)
    base = abs(table.mean() - 0.5)
    for pol in (r.max_policy, r.min_policy, RandomAdversary(3)):
        p = output_distribution(table, spec, pol, 1)
        assert statistical_distance(p, [0.5, 0.5]) <= r.oi_b + base + 1e-12
    assert online_extraction_error(table, spec, 1) <= r.oi_b + base + 1e-12


def test_point_mass_examples():
    spec = SourceSpec(1, 3)
    ident = make_block_function(lambda b: b[0], 1, 3)
    assert worst_case_point_mass(ident, spec, 3)[1] == 1 / 8
    spec = SourceSpec(2, 2, frozenset({2}))
    last = make_block_function(lambda b: b[1], 2, 2)
    assert worst_case_point_mass(last, spec, 2)[1] == 1.0
    xor = make_block_function(lambda b: b[0] ^ b[1], 2, 1)
    assert worst_case_point_mass(xor, SourceSpec(2, 1, frozenset({1})), 1)[1] == 0.5


def test_flat_good_blocks():
    spec = SourceSpec(2, 2, frozenset(), k=1)
    ident = make_block_function(lambda b: 4 * b[0] + b[1], 2, 2)
    p = output_distribution(ident, spec, None, 4, GoodBlockModel.flat(1))
    assert sorted(np.flatnonzero(p)) == [0, 1, 4, 5]


def test_monte_carlo_examples():
    f = dictator(4, 1)
    spec = SourceSpec(4, 1, frozenset({3}))
    est = monte_carlo_bias(f, spec, CrowdingAdversary(), 5000, seed=2)
    lo, hi = est.ci
    assert lo <= 0 <= hi
    assert monte_carlo_bias(f, spec, CrowdingAdversary(), 500, 4) == monte_carlo_bias(f, spec, CrowdingAdversary(), 500, 4)


@pytest.mark.parametrize("seed", range(3))
def test_monte_carlo_agrees_with_dp(seed):
    f = random_function(10, seed)
    spec = SourceSpec(10, 1, frozenset({4, 8, 10}))
    r = optimal_online_bias(f, spec)
    est = monte_carlo_bias(f, spec, r.policy, 40_000, seed)
    lo, hi = est.ci
    assert lo - 1e-9 <= r.oi_b <= hi + 1e-9


def test_crowding_on_majority():
    f = majority(9)
    spec = SourceSpec(9, 1, frozenset({7, 8, 9}))
    r = optimal_online_bias(f, spec)
    est = monte_carlo_bias(f, spec, CrowdingAdversary(), 40_000, 1)
    lo, hi = est.ci
    assert lo <= r.oi_b <= hi


def test_table_adversary_json():
    adv = TableAdversary({2: np.array([1, 0])})
    back = TableAdversary.from_json(adv.to_json())
    assert np.array_equal(back.tables[2], adv.tables[2])


def test_exact_enumeration_counts():
    spec = SourceSpec(3, 1, frozenset({2}))
    f = BooleanFunction(3, np.array([0, 1, 1, 0, 1, 0, 0, 1]))
    n_strats = 0
    for a, b in itertools.product((0, 1), repeat=2):
        exact_expectation(f, spec, TableAdversary({2: np.array([a, b])}))
        n_strats += 1
    assert n_strats == 4
