"""Acceptance runs, one test per criterion.  Each prints a PASS/FAIL line;
the lines are repeated in the pytest terminal summary."""

import math
import time

import numpy as np
import pytest

from acceptance_log import report
from param_oracles import CASES, check_case
from onosf import pipelines
from onosf.boolfn import BooleanFunction, address
from onosf.core import flat_support_array
from onosf.pipelines import param_report, search_xor_condenser, sliding_window_harness
from onosf.prims import control_few_bits, search_object
from onosf.protocols import (
    FixedLeader,
    address_extractor_errors,
    composition_checks,
    estimate_leader_quality,
    two_stage_leader_election,
)
from onosf.sources import SourceSpec, optimal_online_bias
from onosf.verify import (
    all_tables,
    chain_rule_failures,
    dp_matches_brute_force,
    fourier_gap,
    greedy_ok,
    impossibility_ok,
    poincare_violations,
    random_tables,
    sandwich_violations,
)
from onosf.attacks import greedy_coalition, step_bound_gamma
from onosf.boolfn import random_function


def test_1_poincare():
    t0 = time.perf_counter()
    exhaustive = poincare_violations(all_tables(4))
    rand = poincare_violations(random_tables(10_000, 10, 11))
    dt = time.perf_counter() - t0
    ok = exhaustive == 0 and rand == 0 and dt < 120
    report(1, "Poincare inequality", ok, f"65536 at ell=4: {exhaustive} violations; 10^4 at ell=10: {rand}; {dt:.1f}s")
    assert ok


def test_2_fourier_agreement():
    t0 = time.perf_counter()
    gap = 0.0
    # 1000 functions spread over ell = 1..12
    for ell in range(1, 13):
        count = 1000 // 12 + (1 if ell <= 1000 % 12 else 0)
        gap = max(gap, fourier_gap(random_tables(count, ell, 100 + ell)))
    dt = time.perf_counter() - t0
    ok = gap <= 1e-9 and dt < 60
    report(2, "Fourier characterization", ok, f"max gap {gap:.3g}; {dt:.1f}s")
    assert ok


def test_3_address_values():
    details, ok = [], True
    for a in (1, 2, 3):
        f = address(a)
        oi, inf = f.online_influences(), f.influences()
        data = 1 / (1 << a)
        good = (np.all(oi[:a] == 0) and np.allclose(oi[a:], data, atol=1e-12, rtol=0)
                and np.allclose(inf[a:], data, atol=1e-12, rtol=0) and np.all(inf[:a] > 0))
        ok &= bool(good)
        details.append(f"a={a}: oI_addr={oi[0]:g} oI_data={oi[a]:g} I_addr={inf[0]:g} I_data={inf[a]:g}")
    report(3, "address function values", ok, "; ".join(details))
    assert ok


def test_4_sandwich():
    exhaustive = sandwich_violations(all_tables(4))
    rand = sandwich_violations(random_tables(500, 12, 13))
    ok = exhaustive == 0 and rand == 0
    report(4, "sandwich bound", ok, f"ell=4 exhaustive: {exhaustive}; 500 random at ell=12: {rand}")
    assert ok


def test_5_dp_vs_brute_force():
    checked, bad = dp_matches_brute_force(3)
    ok = bad == 0
    report(5, "coalition DP vs strategy enumeration", ok, f"{checked} (f, B) pairs, {bad} mismatches")
    assert ok


def test_6_greedy():
    worst_ratio, failures = 0.0, 0
    for s in range(100):
        f = random_function(12, s, balanced=True)
        cert = greedy_coalition(f, 0.6)
        bound = 12 * step_bound_gamma(cert.alpha, 0.6)
        worst_ratio = max(worst_ratio, cert.size / bound)
        if (cert.size > bound + 1e-9 or cert.achieved_expectation < 0.6 - 1e-12
                or abs(cert.replay() - cert.achieved_expectation) > 1e-9):
            failures += 1
    ok = failures == 0 and greedy_ok(100)[1] == 0
    report(6, "greedy coalition guarantee", ok, f"100 functions, {failures} failures, max size/bound {worst_ratio:.3g}")
    assert ok


def test_7_impossibility():
    checked, bad = impossibility_ok(4, 0.1)
    ok = bad == 0 and checked == math.comb(16, 8)
    report(7, "extraction impossibility", ok, f"{checked} balanced functions, {bad} without a size<=2 coalition")
    assert ok


def test_8_address_extractor():
    worst = {ell: max(address_extractor_errors(ell).values()) for ell in (3, 4, 5)}
    ok = all(w <= 1 / (ell - 1) + 1e-12 for ell, w in worst.items())
    report(8, "address extractor error", ok, " ".join(f"ell={k}: {v:g} <= {1 / (k - 1):g}" for k, v in worst.items()))
    assert ok


def test_9_chain_rules():
    worst, avg = chain_rule_failures(1000, seed=5)
    ok = worst == 0 and avg == 0
    report(9, "chain rules", ok, f"1000 joints each: worst-case failures {worst}, average-case failures {avg}")
    assert ok


def test_10_control_few_bits():
    n, d, k, eps = 4, 1, 2, 0.05
    supports = flat_support_array(n, k)
    total = failures = 0
    for s in range(20):
        cond, _ = search_object("seeded_cond", {"n": n, "d": d}, {"k_in": k, "k_out": 1.5}, 0.25, rng_seed=s)
        src = supports[(97 * s) % len(supports)]
        support = ((src[:, None] << d) | np.arange(1 << d)[None, :]).reshape(-1)
        for b in range(4):
            for r in control_few_bits(cond.table.reshape(-1), support, n + d, cond.m, eps, b):
                total += 1
                failures += not r.holds
    ok = failures == 0
    report(10, "control of few bits", ok, f"20 condensers, {total} fixing patterns with b<=3, {failures} failures")
    assert ok


SLIDING = [(3, 1, 1), (4, 1, 1), (4, 1, 2), (5, 1, 2), (3, 2, 1), (4, 2, 1), (4, 2, 2), (3, 3, 1), (3, 3, 2)]


def test_11_sliding_window():
    checks = skipped = 0
    ok = True
    for ell, n, d in SLIDING:
        ext, _ = search_object("two_source_ext", {"n1": d * n, "n2": n, "m": 1},
                               {"k1": n, "k2": n, "strong": "x"}, 0.25, rng_seed=1)
        rep = sliding_window_harness(ext, ell, n, d)
        ok &= rep.passed and all(c.distance <= 2 * rep.eps_lemma + 1e-9 for c in rep.checks)
        ok &= all(cnt >= bound - 1e-12 for _, cnt, bound in rep.counts)
        checks += len(rep.checks)
        skipped += len(rep.skipped)
    report(11, "sliding-window transform", ok,
           f"{len(SLIDING)} instances, {checks} good-output checks, {skipped} bad patterns over strategy budget")
    assert ok


def test_12_xor_condenser():
    res = search_xor_condenser(2, 8, 2, (4, 4), 0.25, rng_seed=0)
    labels = {c.label for c in res.checks}
    ok = all(c.passed for c in res.checks) and labels == {"j=1", "j=2"}
    report(12, "XOR condenser harness", ok, f"trial {res.trial}, {len(res.checks)} (pattern, j) checks")
    assert ok


@pytest.mark.parametrize("variant", ["one_bit", "multi_bit"])
def test_13_lightest_bin(variant):
    t0 = time.perf_counter()
    if variant == "one_bit":
        spec = two_stage_leader_election(1024, "one_bit", threshold=32)
        key = "survivor_stated"
    else:
        spec = two_stage_leader_election(4096, "multi_bit", C0=2, C1=1, delta=0.1)
        key = "survivor_multi"
    st = estimate_leader_quality(spec, "crowd", 0.1, 100_000, rng_seed=7)
    dt = time.perf_counter() - t0
    ok = st.checks[key] >= 0.99 and dt < 300
    report(13, f"lightest-bin survivors, {variant}", ok,
           f"ell={spec.ell}, fraction within bound {st.checks[key]:.5f}, {dt:.1f}s")
    assert ok


def test_14_extractor_from_protocol():
    total = failures = 0
    for ell in (2, 3):
        for proto in (FixedLeader(ell), two_stage_leader_election(ell, threshold=ell),
                      two_stage_leader_election(ell, threshold=1, final_stage="first")):
            for c in composition_checks(proto, 2):
                total += 1
                failures += not c.passed
    ok = failures == 0 and total > 0
    report(14, "extractor from protocol", ok, f"{total} (protocol, bad set) instances, {failures} failures")
    assert ok


def test_15_parameter_calculators():
    errs, cases = [], 0
    missing = sorted(set(pipelines._REGISTRY) - set(CASES))
    for name, items in CASES.items():
        for inputs, consts, expected, violated in items:
            cases += 1
            errs += check_case(param_report(name, inputs, consts), expected, violated)
    ok = not errs and not missing
    report(15, "parameter calculators", ok, f"{len(CASES)} formulas, {cases} cases, {len(errs)} mismatches, "
                                            f"uncovered {missing or 'none'}")
    assert ok, errs
