import numpy as np
import pytest
from hypothesis import given, strategies as st

from onosf.boolfn import (
    BooleanFunction,
    address,
    constant,
    dictator,
    majority,
    make_named_function,
    parity,
    random_function,
)


@st.composite
def functions(draw, max_ell=8):
    ell = draw(st.integers(1, max_ell))
    bits = draw(st.lists(st.integers(0, 1), min_size=1 << ell, max_size=1 << ell))
    return BooleanFunction(ell, np.array(bits, dtype=np.uint8))


def direct_online_influence(f, i):
    t = f.table.reshape(1 << (i - 1), 2, -1).astype(float)
    return float(np.abs(t[:, 1, :].mean(axis=1) - t[:, 0, :].mean(axis=1)).mean())


def direct_influence(f, i):
    t = f.table.reshape(1 << (i - 1), 2, -1)
    return float((t[:, 1, :] != t[:, 0, :]).mean())


def test_spectrum_examples():
    s = parity(2).spectrum()
    assert s[3] == pytest.approx(1.0) and np.allclose(s[:3], 0)
    s = constant(3, 0).spectrum()
    assert s[0] == 1.0 and np.allclose(s[1:], 0)
    # coordinate 1 is the most significant mask bit; dictator 1 reads x1 so e(f) = chi_{1}
    s = dictator(3, 1).spectrum()
    assert s[0b100] == pytest.approx(1.0)


def test_influence_examples():
    assert all(parity(3).influence(i) == 1.0 for i in (1, 2, 3))
    assert all(majority(3).influence(i) == 0.5 for i in (1, 2, 3))
    assert dictator(3, 1).influence(2) == 0.0


def test_online_influence_examples():
    p = parity(3)
    assert p.online_influence(1) == 0.0 and p.online_influence(3) == 1.0
    a = address(1)
    assert a.online_influence(1) == 0.0 and a.online_influence(2) == 0.5
    assert [majority(3).online_influence(i) for i in (1, 2, 3)] == [0.5, 0.5, 0.5]
    assert parity(3).online_influence_fourier(3) == pytest.approx(1.0)
    assert constant(4, 1).online_influence_fourier(2) == 0.0


def test_totals_and_argmax():
    assert parity(5).total_online_influence() == pytest.approx(1.0)
    assert majority(3).total_online_influence() == pytest.approx(1.5)
    assert constant(3, 0).total_online_influence() == 0.0
    assert majority(3).max_online_influence() == (1, 0.5)
    assert address(2).max_online_influence() == (3, 0.25)


def test_poincare_examples():
    r = parity(4).poincare_report()
    assert (r.variance, r.total_online_influence) == (1.0, pytest.approx(1.0)) and r.ok
    r = constant(3, 1).poincare_report()
    assert (r.variance, r.total_online_influence, r.upper) == (0.0, 0.0, 0.0)


def test_majority_total_grows_like_sqrt():
    ratios = [majority(ell).total_online_influence() / np.sqrt(ell) for ell in (5, 9, 13, 17)]
    assert max(ratios) / min(ratios) < 1.3
    assert all(r > 0.5 for r in ratios)


def test_named_functions():
    a = address(1)
    # Addr(0, y1, y2) = y1
    for y1 in (0, 1):
        for y2 in (0, 1):
            assert a((0 << 2) | (y1 << 1) | y2) == y1
            assert a((1 << 2) | (y1 << 1) | y2) == y2
    assert majority(3)(0b110) == 1
    assert list(parity(2).table) == [0, 1, 1, 0]
    assert make_named_function("addr", ell=6) == address(2)
    with pytest.raises(ValueError):
        majority(4)
    with pytest.raises(ValueError):
        make_named_function("address", ell=7)


def test_coordinate_range():
    with pytest.raises(ValueError):
        parity(3).online_influence(0)
    with pytest.raises(ValueError):
        parity(3).influence(4)


@given(functions())
def test_parseval(f):
    assert (f.spectrum() ** 2).sum() == pytest.approx(1.0, abs=1e-9)


@given(functions())
def test_influences_match_direct_definitions(f):
    for i in range(1, f.ell + 1):
        assert f.online_influence(i) == pytest.approx(direct_online_influence(f, i), abs=1e-12)
        assert f.influence(i) == pytest.approx(direct_influence(f, i), abs=1e-12)
        spec = f.spectrum()
        masks = [s for s in range(1 << f.ell) if s >> (f.ell - i) & 1]
        assert f.influence(i) == pytest.approx(float((spec[masks] ** 2).sum()), abs=1e-9)


@given(functions())
def test_online_at_most_standard(f):
    oi, inf = f.online_influences(), f.influences()
    assert np.all(oi <= inf + 1e-12)
    assert oi[-1] == pytest.approx(inf[-1])


@given(functions())
def test_fourier_form_and_poincare(f):
    for i in range(1, f.ell + 1):
        assert f.online_influence_fourier(i) == pytest.approx(f.online_influence(i), abs=1e-9)
    assert f.poincare_report(1e-9).ok


@given(st.integers(1, 6), st.data())
def test_monotone_online_equals_standard(ell, data):
    # upward closure of random generators is monotone
    gens = data.draw(st.lists(st.integers(0, (1 << ell) - 1), max_size=4))
    x = np.arange(1 << ell)
    t = np.zeros(1 << ell, dtype=np.uint8)
    for g in gens:
        t |= ((x & g) == g).astype(np.uint8)
    f = BooleanFunction(ell, t)
    assert np.allclose(f.online_influences(), f.influences(), atol=1e-12)


@given(functions())
def test_hex_roundtrip(f):
    assert BooleanFunction.from_hex(f.to_hex(), f.ell) == f
    assert BooleanFunction.from_json(f.to_json()) == f


def test_hex_is_little_endian_over_inputs():
    assert parity(3).to_hex() == "96"
    assert BooleanFunction.from_hex("96") == parity(3)
    with pytest.raises(ValueError):
        BooleanFunction.from_hex("zz", 3)


@given(functions(), st.data())
def test_restrict(f, data):
    i = data.draw(st.integers(1, f.ell))
    b = data.draw(st.integers(0, 1))
    g = f.restrict(i, b)
    x = data.draw(st.integers(0, (1 << (f.ell - 1)) - 1))
    hi, lo = x >> (f.ell - i), x & ((1 << (f.ell - i)) - 1)
    assert g(x) == f((((hi << 1) | b) << (f.ell - i)) | lo)


def test_random_balanced():
    f = random_function(10, 3, balanced=True)
    assert f.is_balanced()
    assert random_function(10, 3) == random_function(10, 3)
