import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onosf.core import BudgetExceeded
from onosf.prims import (
    SearchFailed,
    SeededCondenser,
    SeededExtractor,
    TwoSourceExtractor,
    asymmetric_2ext,
    average_case_lift,
    average_conditional_min_entropy,
    chain_rule_fraction,
    control_few_bits,
    inner_product_2ext,
    lhl_error_bound,
    lhl_extractor,
    object_from_json,
    search_object,
    seeded_error_naive,
    toeplitz_eval,
    toeplitz_eval_naive,
    two_source_error_naive,
    verify_seeded_condenser,
    verify_seeded_extractor,
    verify_two_source_extractor,
)


@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_toeplitz_matches_naive(n, m, data):
    if m > n:
        n, m = m, n
    x = data.draw(st.integers(0, (1 << n) - 1))
    s = data.draw(st.integers(0, (1 << (n + m - 1)) - 1))
    assert int(toeplitz_eval(x, s, n, m)) == toeplitz_eval_naive(x, s, n, m)


def test_lhl_linear():
    ext = lhl_extractor(4, 2)
    assert np.all(ext.table[0] == 0)
    x, y = 5, 9
    assert np.array_equal(ext.table[x ^ y], ext.table[x] ^ ext.table[y])


def test_lhl_verification_n5_k3():
    ext = lhl_extractor(5, 1)
    rep = verify_seeded_extractor(ext, 3, strong=True, budget=11_000_000)
    assert rep.measured <= lhl_error_bound(3, 1) + 1e-12
    assert rep.sources_checked == math.comb(32, 8)


def test_lhl_verification_budget():
    with pytest.raises(BudgetExceeded):
        verify_seeded_extractor(lhl_extractor(5, 1), 3, strong=True, budget=1000)


@pytest.mark.parametrize("n,k,m,strong", [(3, 1, 1, True), (3, 2, 1, False), (4, 2, 2, True), (4, 1, 1, False)])
def test_seeded_verifier_matches_naive(n, k, m, strong):
    ext = lhl_extractor(n, m)
    assert verify_seeded_extractor(ext, k, strong).measured == pytest.approx(seeded_error_naive(ext, k, strong), abs=1e-12)
    rng = np.random.default_rng(n * 10 + k)
    rand = SeededExtractor(n, 2, m, rng.integers(0, 1 << m, size=(1 << n, 4)))
    assert verify_seeded_extractor(rand, k, strong).measured == pytest.approx(seeded_error_naive(rand, k, strong), abs=1e-12)


def test_seeded_verifier_trivial_cases():
    const = SeededExtractor(3, 1, 2, np.zeros((8, 2), dtype=np.int64))
    assert verify_seeded_extractor(const, 2).measured == pytest.approx(1 - 2**-2)
    seed_only = SeededExtractor(3, 1, 1, np.tile([0, 1], (8, 1)))
    assert verify_seeded_extractor(seed_only, 1).measured == 0.0


def pair_error(ext, sx, sy):
    vals = ext.table[np.ix_(sx, sy)].reshape(-1)
    p = np.bincount(vals, minlength=1 << ext.m) / vals.size
    return 0.5 * float(np.abs(p - 1 / (1 << ext.m)).sum())


def test_inner_product_examples():
    ext = inner_product_2ext(4, 2)
    assert np.array_equal(ext.table[1], np.arange(16) & 3)
    assert np.all(ext.table[0] == 0)
    rep = verify_two_source_extractor(inner_product_2ext(4, 1), 3, 3)
    assert rep.measured <= 0.25
    small = inner_product_2ext(3, 1)
    assert verify_two_source_extractor(small, 2, 2).measured == pytest.approx(two_source_error_naive(small, 2, 2))


def test_asymmetric_examples():
    assert np.array_equal(asymmetric_2ext(1, 3, 2).table, inner_product_2ext(3, 2).table)
    ext = asymmetric_2ext(2, 3, 1)
    assert np.all(ext.table[:, 0] == 0)
    rep = verify_two_source_extractor(ext, 4, 2)
    assert pair_error(ext, *rep.witness) == pytest.approx(rep.measured)
    small = asymmetric_2ext(2, 2, 1)
    assert verify_two_source_extractor(small, 2, 1).measured == pytest.approx(two_source_error_naive(small, 2, 1))


@given(st.integers(0, 1000))
@settings(max_examples=15)
def test_two_source_verifier_matches_naive(seed):
    rng = np.random.default_rng(seed)
    ext = TwoSourceExtractor(3, 2, 1, rng.integers(0, 2, size=(8, 4)))
    for k1, k2 in ((1, 1), (2, 1), (1, 0)):
        assert verify_two_source_extractor(ext, k1, k2).measured == pytest.approx(two_source_error_naive(ext, k1, k2), abs=1e-12)


def test_two_source_uniform_inputs():
    ext = inner_product_2ext(3, 2)
    p = np.bincount(ext.table.reshape(-1), minlength=4) / ext.table.size
    assert verify_two_source_extractor(ext, 3, 3).measured == pytest.approx(0.5 * np.abs(p - 0.25).sum())


def test_condenser_identity_padding():
    # output = x concatenated with the seed keeps all k_in + d bits
    n, d = 3, 1
    table = (np.arange(1 << n)[:, None] << d) | np.arange(1 << d)[None, :]
    cond = SeededCondenser(n, d, n + d, table)
    rep = verify_seeded_condenser(cond, 2, 3, 0.0)
    assert rep.passed and rep.measured == pytest.approx(3.0)


def test_search_examples():
    # output length grows until a table passes; m = 4, 5 fail and m = 6 passes
    cond, rep = search_object("seeded_cond", {"n": 4, "d": 2}, {"k_in": 2, "k_out": 4}, 0.25, rng_seed=0)
    assert rep.passed and cond.m == 6 and rep.measured >= 4 - 1e-9
    again = verify_seeded_condenser(cond, 2, 4, 0.25)
    assert again.measured == rep.measured
    ext, rep = search_object("two_source_ext", {"n1": 3, "n2": 3, "m": 1}, {"k1": 2, "k2": 2}, 0.3, rng_seed=0)
    assert rep.passed and verify_two_source_extractor(ext, 2, 2).measured == rep.measured
    ext, rep = search_object("seeded_ext", {"n": 2, "d": 1, "m": 1}, {"k": 2}, 0.5, rng_seed=3)
    assert rep.passed


def test_search_failure_carries_best():
    with pytest.raises(SearchFailed) as exc:
        search_object("seeded_ext", {"n": 3, "d": 1, "m": 2}, {"k": 1}, 0.0, rng_seed=0, tries=5)
    assert exc.value.report is not None


def test_object_json_roundtrip():
    ext, _ = search_object("two_source_ext", {"n1": 2, "n2": 2, "m": 1}, {"k1": 1, "k2": 1}, 0.5, rng_seed=2)
    back = object_from_json(ext.to_json())
    assert np.array_equal(back.table, ext.table)
    assert np.array_equal(object_from_json(lhl_extractor(3, 2).to_json()).table, lhl_extractor(3, 2).table)
    assert np.array_equal(object_from_json(asymmetric_2ext(2, 2, 1).to_json()).table, asymmetric_2ext(2, 2, 1).table)


def test_average_case_lift_examples():
    k, e, vac = average_case_lift(10, 0.01, 0.01)
    assert k == pytest.approx(10 + math.log2(100)) and e == pytest.approx(0.02) and not vac
    assert average_case_lift(3, 0.1, 0.5)[:2] == (4.0, 0.6)
    assert average_case_lift(3, 0.1, 1.0)[2]
    with pytest.raises(ValueError):
        average_case_lift(3, 0.1, 0)


@st.composite
def joints(draw, dims=2):
    shape = tuple(draw(st.integers(1, 5)) for _ in range(dims))
    w = np.array(draw(st.lists(st.integers(0, 9), min_size=math.prod(shape), max_size=math.prod(shape))), float)
    if w.sum() == 0:
        w[0] = 1
    return (w / w.sum()).reshape(shape)


@given(joints(), st.floats(0.01, 0.99))
def test_min_entropy_chain_rule(p, eps):
    mass, _ = chain_rule_fraction(p, eps)
    assert mass >= 1 - eps - 1e-9


@given(joints(3))
def test_average_chain_rule(q):
    lam = math.log2(int(np.count_nonzero(q.sum(axis=(0, 2)) > 0)))
    h_a_bc = average_conditional_min_entropy(q, (1, 2))
    h_ab_c = average_conditional_min_entropy(q, (2,))
    h_a_c = average_conditional_min_entropy(q.sum(axis=1), (1,))
    assert h_a_bc >= h_ab_c - lam - 1e-9
    assert h_ab_c >= h_a_c - 1e-9


def test_average_conditional_examples():
    # A = B exactly: nothing left to guess
    p = np.eye(4) / 4
    assert average_conditional_min_entropy(p, (1,)) == 0.0
    # independent uniform A
    assert average_conditional_min_entropy(np.full((4, 2), 1 / 8), (1,)) == pytest.approx(2.0)


def test_control_few_bits_identity():
    # identity output on a uniform 3-bit input: fixing b bits costs exactly b bits
    out = np.arange(8)
    res = control_few_bits(out, np.arange(8), 3, 3, 0.0, 1)
    assert len(res) == 3 and all(r.exact for r in res)
    assert all(r.measured == pytest.approx(2.0) and r.holds for r in res)


@given(st.integers(0, 500))
@settings(max_examples=10)
def test_control_few_bits_random_tables(seed):
    rng = np.random.default_rng(seed)
    out = rng.integers(0, 4, 16)
    support = np.sort(rng.choice(16, 8, replace=False))
    for b in (1, 2):
        assert all(r.holds for r in control_few_bits(out, support, 4, 2, 0.1, b))
