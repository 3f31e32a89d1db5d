import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from onosf.core import ConfigError
from onosf.pipelines import (
    PipelineConfig,
    exact_good_output_count,
    explicit_xor_condenser,
    explicit_xor_condenser_table,
    general_uni_condenser,
    general_uni_condenser_table,
    general_uni_harness,
    good_output_count,
    half_widths,
    log_star,
    param_report,
    run_pipeline,
    sliding_window_transform,
    split_halves,
    theorem_ids,
    two_uni_harness,
    two_unionosf_condenser,
    xor_lemma_check,
    xor_multi_extract,
)
from onosf.prims import SeededExtractor, TwoSourceExtractor, lhl_extractor, search_object, verify_seeded_extractor


def window_ext(d, n, m, seed=0):
    rng = np.random.default_rng(seed)
    return TwoSourceExtractor(d * n, n, m, rng.integers(0, 1 << m, size=(1 << (d * n), 1 << n)))


def test_sliding_window_hand_evaluation():
    ext = window_ext(1, 2, 1, seed=4)
    blocks = (2, 1, 3)
    # O_2 = 2Ext(X_1, X_2), O_3 = 2Ext(X_2, X_3)
    assert sliding_window_transform(blocks, ext, 1, 2) == (ext.eval(2, 1), ext.eval(1, 3))


def test_sliding_window_zero_padding_and_prefix_form():
    ell, n = 4, 1
    ext = window_ext(ell, n, 1, seed=1)
    blocks = (1, 0, 1, 1)
    out = sliding_window_transform(blocks, ext, ell, n)
    # d = l: the window is the whole prefix, left-padded with zero blocks
    for i in range(2, ell + 1):
        prefix = int("".join(map(str, blocks[: i - 1])), 2)
        assert out[i - 2] == ext.eval(prefix, blocks[i - 1])
    zeros = sliding_window_transform((0, 0, 0, 0), ext, ell, n)
    assert zeros == (ext.eval(0, 0),) * 3


def test_sliding_window_width_mismatch():
    with pytest.raises(ValueError):
        sliding_window_transform((0, 0, 0), window_ext(1, 2, 1), 2, 2)


def test_good_output_count_examples():
    assert good_output_count(6, 10, 2) == Fraction(5, 2)
    assert good_output_count(7, 7, 1) == 5
    assert good_output_count(6, 10, 10) == Fraction(9, 2)


@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_good_output_count_is_a_lower_bound(ell, d, data):
    good = data.draw(st.sets(st.integers(1, ell), min_size=1))
    assert exact_good_output_count(sorted(good), ell, d) >= good_output_count(len(good), ell, d)


def test_good_output_count_exhaustive_small():
    for ell in range(1, 9):
        for r in range(1, ell + 1):
            for good in itertools.combinations(range(1, ell + 1), r):
                for d in (1, 2, 3):
                    assert exact_good_output_count(good, ell, d) >= good_output_count(r, ell, d)


def test_halves_left_gets_extra_bit():
    assert half_widths(5) == (3, 2)
    vals, widths = split_halves([0b10110], 5)
    assert vals == [0b101, 0b10] and widths == [3, 2]


def test_xor_multi_extract():
    ext = lhl_extractor(4, 2)
    assert xor_multi_extract(9, [5], [ext]) == ext.eval(9, 5)
    assert xor_multi_extract(9, [5, 5], [ext, ext]) == 0
    with pytest.raises(ValueError):
        xor_multi_extract(9, [5], [ext, ext])


def xor_distance_direct(support, exts, j, fixed):
    m = exts[0].m
    counts = np.zeros(1 << m)
    free = [range(1 << e.d) for e in exts[j - 1:]]
    for x in support:
        for ys in itertools.product(*free):
            z = 0
            for e, y in zip(exts, list(fixed) + list(ys)):
                z ^= e.eval(int(x), y)
            counts[z] += 1
    p = counts / counts.sum()
    return 0.5 * float(np.abs(p - 1 / (1 << m)).sum())


@given(st.integers(0, 10_000))
def test_xor_lemma_check_matches_direct(seed):
    rng = np.random.default_rng(seed)
    exts = [SeededExtractor(5, d, 1, rng.integers(0, 2, size=(32, 1 << d))) for d in (1, 2, 2)]
    support = np.sort(rng.choice(32, 8, replace=False))
    for j in (1, 2, 3):
        fixed = [int(rng.integers(0, 1 << e.d)) for e in exts[: j - 1]]
        assert xor_lemma_check(support, exts, j, fixed) == pytest.approx(xor_distance_direct(support, exts, j, fixed))


def test_xor_lemma_with_seed_only_first_extractor():
    # a first extractor that ignores x only shifts the output, so the error is that of the second
    rng = np.random.default_rng(5)
    first = SeededExtractor(5, 1, 1, np.tile([0, 1], (32, 1)))
    second = SeededExtractor(5, 2, 1, rng.integers(0, 2, size=(32, 4)))
    worst = verify_seeded_extractor(second, 3, budget=11_000_000).measured
    for t in range(200):
        support = np.sort(rng.choice(32, 8, replace=False))
        for y1 in (0, 1):
            assert xor_lemma_check(support, [first, second], 2, [y1]) <= worst + 1e-12


def test_xor_condenser_single_block():
    rng = np.random.default_rng(0)
    ext = SeededExtractor(2, 2, 1, rng.integers(0, 2, size=(4, 4)))
    cfg = PipelineConfig("xor", 1, 4, m=1, n_y=(2,), primitives={"exts": [ext]})
    for x in range(16):
        assert explicit_xor_condenser([x], cfg) == ext.eval(x >> 2, x & 3)


def test_xor_table_matches_pointwise():
    rng = np.random.default_rng(1)
    exts = [SeededExtractor(4, ny, 2, rng.integers(0, 4, size=(16, 1 << ny))) for ny in (2, 1)]
    cfg = PipelineConfig("xor", 2, 4, m=2, n_y=(2, 1), primitives={"exts": exts})
    table = explicit_xor_condenser_table(cfg)
    for x in range(256):
        assert table[x] == explicit_xor_condenser([x >> 4, x & 15], cfg) == run_pipeline([x >> 4, x & 15], cfg)


def test_config_validation_and_json():
    with pytest.raises(ConfigError):
        PipelineConfig("xor", 2, 4, n_y=(1,))
    with pytest.raises(ConfigError):
        PipelineConfig("nope", 2, 4)
    with pytest.raises(ConfigError):
        PipelineConfig("general_uni", 2, 4, n_v=5)
    rng = np.random.default_rng(2)
    exts = [SeededExtractor(4, 2, 1, rng.integers(0, 2, size=(16, 4))) for _ in range(2)]
    cfg = PipelineConfig("xor", 2, 4, m=1, n_y=(2, 2), eps=0.25, primitives={"exts": exts})
    back = PipelineConfig.from_json(cfg.to_json())
    assert np.array_equal(explicit_xor_condenser_table(back), explicit_xor_condenser_table(cfg))


@pytest.fixture(scope="module")
def general_cfg():
    sc, _ = search_object("seeded_cond", {"n": 4, "d": 4, "m": 3}, {"k_in": 2, "k_out": 2}, 0.125, rng_seed=0)
    return PipelineConfig("general_uni", 4, 2, n_v=1, primitives={"scond": sc}, eps_scond=0.125)


def test_general_uni_tiny_instance(general_cfg):
    checks = general_uni_harness(general_cfg, 3, 2, 0.125)
    assert checks and all(c.passed for c in checks)
    table = general_uni_condenser_table(general_cfg)
    for x in (0, 77, 200, 255):
        blocks = [(x >> s) & 3 for s in (6, 4, 2, 0)]
        assert table[x] == general_uni_condenser(blocks, general_cfg)


def test_general_uni_all_good_is_close_to_uniform(general_cfg):
    table = general_uni_condenser_table(general_cfg)
    p = np.bincount(table, minlength=8) / table.size
    assert 0.5 * np.abs(p - 1 / 8).sum() <= 0.125 + 1e-12


def test_two_source_condenser_degrades_by_bad_seed_bits():
    sc, _ = search_object("seeded_cond", {"n": 2, "d": 2, "m": 2}, {"k_in": 1, "k_out": 1}, 0.125, rng_seed=0)
    checks = two_uni_harness(sc, 2, 1, 1, 1, 0.125)
    assert all(c.passed for c in checks)
    for c in checks:
        b = int(c.label.split("=")[1])
        assert c.bound == 1 - b and c.eps == 0.125 * 2**b
    assert two_unionosf_condenser([1, 0], [1, 1], sc, 1, 1) == sc.eval(2, 3)


def test_param_report_examples():
    ell = 10_000
    r = param_report("thm6.1", {"d": 100, "g": Fraction(51, 100) * ell, "ell": ell, "n": 64, "m": 1,
                                "k": 64, "eps": Fraction(1, 4)})
    assert float(r.values["g_out_max"]) == pytest.approx(0.51 * ell - (0.49 * ell + 2) / 100)
    assert float(r.values["g_out_max"]) / ell == pytest.approx(0.505, abs=1e-3)
    r = param_report("cor3.3", {"ell": 10, "n": 4, "eps": Fraction(1, 4), "delta": 0})
    assert not r.feasible and "delta_positive" in r.violated
    r = param_report("lemma6.2", {"d": 2, "g": 8, "ell": 10, "m": 3, "k": 5, "k_2ext": 1, "eps_2ext": Fraction(1, 4)})
    assert "entropy_clause" in r.violated
    r = param_report("thm4.2", {"ell": 3, "n": 2**12, "eps": Fraction(1, 256), "C": 2})
    assert r.values["m"] == pytest.approx((2**11 - 6**3 * math.log2(2 * 3 * 2**12 * 256)) / 3)


def test_param_report_errors():
    with pytest.raises(ConfigError):
        param_report("nope", {})
    with pytest.raises(ConfigError):
        param_report("few_bits", {"k": 1})
    with pytest.raises(ConfigError):
        param_report("few_bits", {"k": 1, "eps": 0.1, "b": 1}, {"c": 1})
    assert "few_bits" in theorem_ids()


def test_log_star():
    assert [log_star(x) for x in (1, 2, 4, 16, 65536, 1e300)] == [0, 1, 2, 3, 4, 5]
