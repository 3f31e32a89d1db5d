import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onosf.core import ConfigError
from onosf.protocols import (
    CrowdingPlayerAdversary,
    FixedLeader,
    FixedMessageAdversary,
    FunctionPlayerAdversary,
    XorFixer,
    address_extractor_errors,
    collective_sampling_stats,
    composition_checks,
    crowd_allocation,
    estimate_leader_quality,
    exact_bad_leader_probability,
    final_stage_index_election,
    lightest_bin_round,
    protocol_sampler,
    run_protocol,
    search_final_stage,
    table_protocol,
    two_stage_leader_election,
    xor_coin_protocol,
)


# lightest bin

def test_lightest_bin_examples():
    # players 1..5 in bin 0, 6..8 in bin 1
    choices = {j: 0 for j in range(1, 6)} | {j: 1 for j in range(6, 9)}
    assert lightest_bin_round(choices, 2) == (6, 7, 8)
    assert lightest_bin_round([0, 0, 0, 0, 1, 1, 1, 1], 2) == (1, 2, 3, 4)
    assert lightest_bin_round([0, 0, 1, 1, 1, 1, 1, 2], 3) == (8,)


def test_lightest_bin_empty_bin_wins():
    assert lightest_bin_round([0, 0, 1], 3) == ()


def test_lightest_bin_rejects_bad_input():
    with pytest.raises(ValueError):
        lightest_bin_round([0, 2], 2)
    with pytest.raises(ValueError):
        lightest_bin_round([0, 1], 1)


@settings(max_examples=100)
@given(st.integers(2, 6).flatmap(lambda b: st.tuples(st.just(b), st.lists(st.integers(0, b - 1), min_size=1, max_size=40))))
def test_lightest_bin_size_bound(args):
    bins, choices = args
    out = lightest_bin_round(choices, bins)
    assert len(out) <= len(choices) // bins
    counts = np.bincount(choices, minlength=bins)
    assert len(out) == counts.min()


# final stage

def test_index_election():
    assert final_stage_index_election([4, 9], 0) == 9
    assert final_stage_index_election([4, 9], 1) == 9
    assert final_stage_index_election([1, 2, 3], 1) == 3
    assert final_stage_index_election([7], 0) == 7
    assert final_stage_index_election([], 0) is None
    with pytest.raises(ValueError):
        final_stage_index_election([1, 2, 3, 4, 5], 0, bits=1)


def test_index_election_three_players_honest():
    # an honest first player splits the leadership evenly between the others
    spec = two_stage_leader_election(3, threshold=3)
    assert exact_bad_leader_probability(spec, {2}) == pytest.approx(0.5)
    # a bad first player can only name good players
    assert exact_bad_leader_probability(spec, {1}) == pytest.approx(0.0)


# two-stage election

def test_no_rounds_when_threshold_covers_players():
    spec = two_stage_leader_election(16, threshold=16)
    assert spec.planned_rounds() == []
    with pytest.raises(ConfigError):
        two_stage_leader_election(16, threshold=16, strict=True)


def test_round_counts():
    spec = two_stage_leader_election(1024, threshold=32)
    assert len(spec.planned_rounds()) <= 10
    assert spec.final_players_bound() <= 32
    multi = two_stage_leader_election(10 ** 6, "multi_bit", delta=0.1)
    assert len(multi.planned_rounds()) <= 5


def test_default_one_bit_threshold():
    spec = two_stage_leader_election(1024)
    assert spec.threshold == pytest.approx(30.0)


def test_bad_configs():
    for kw in ({"variant": "three_bit"}, {"final_stage": "last"}, {"C0": 0}):
        with pytest.raises(ConfigError):
            two_stage_leader_election(64, **kw)
    with pytest.raises(ConfigError):
        two_stage_leader_election(1)


# runs

def test_run_is_deterministic():
    spec = two_stage_leader_election(64, threshold=8)
    adv = CrowdingPlayerAdversary(frozenset({3, 10, 40}))
    a, b = run_protocol(spec, adv, 11), run_protocol(spec, adv, 11)
    assert a.outcome == b.outcome and a.transcript == b.transcript
    assert a.survivors[0] == 64
    assert all(x >= y for x, y in zip(a.survivors, a.survivors[1:]))


def test_transcript_lines():
    run = run_protocol(xor_coin_protocol(3, 4), None, 0)
    lines = [json.loads(s) for s in run.transcript_lines()]
    assert [d["player"] for d in lines] == [1, 2, 3]
    assert all(d["round"] == 1 for d in lines)
    acc = 0
    for d in lines:
        acc ^= int(d["message"], 16)
    assert acc == run.outcome


@pytest.mark.parametrize("target", [0, 5, 15])
def test_xor_fixer(target):
    spec = xor_coin_protocol(4, 4)
    adv = XorFixer(frozenset({2, 4}), target)
    assert all(run_protocol(spec, adv, s).outcome == target for s in range(20))


def test_adversary_must_answer_for_its_players():
    spec = xor_coin_protocol(3)
    adv = FunctionPlayerAdversary(frozenset({2}), lambda *a: {3: 0})
    with pytest.raises(ValueError):
        run_protocol(spec, adv, 0)
    with pytest.raises(ValueError):
        run_protocol(spec, FixedMessageAdversary(frozenset({2}), 5), 0)
    with pytest.raises(ValueError):
        run_protocol(spec, FixedMessageAdversary(frozenset({9}), 0), 0)


# crowding

@settings(max_examples=100)
@given(
    st.lists(st.integers(0, 12), min_size=2, max_size=5),
    st.integers(0, 30),
)
def test_crowd_allocation(goods, bad):
    g = np.array([goods])
    t, x_t, pad = crowd_allocation(g, np.array([bad]))
    t, x_t, pad = int(t[0]), int(x_t[0]), int(pad[0])
    assert t == int(np.argmin(goods))
    assert 0 <= x_t and x_t + pad <= bad
    level = goods[t] + x_t
    counts = list(goods)
    counts[t] = level
    # bins before the target need strictly more, bins after at least as many
    need = sum(max(0, level + (c < t) - goods[c]) for c in range(len(goods)) if c != t)
    assert need == pad
    counts = [max(goods[c], level + (c < t)) if c != t else level for c in range(len(goods))]
    assert int(np.argmin(counts)) == t
    # one more crowding player would not fit
    more = sum(max(0, level + 1 + (c < t) - goods[c]) for c in range(len(goods)) if c != t)
    assert x_t + 1 + more > bad


def test_crowding_player_adversary_keeps_bad_players():
    spec = two_stage_leader_election(256, threshold=16)
    bad = frozenset(range(1, 65))
    honest = FixedMessageAdversary(bad, 0)
    crowd = CrowdingPlayerAdversary(bad)
    bad_c = sum(run_protocol(spec, crowd, s).outcome in bad for s in range(40))
    bad_h = sum(run_protocol(spec, honest, s).outcome in bad for s in range(40))
    assert bad_c >= bad_h


# exact values and composition

def test_fixed_leader():
    assert exact_bad_leader_probability(FixedLeader(3), {1}) == 1.0
    assert exact_bad_leader_probability(FixedLeader(3), {2}) == 0.0


@pytest.mark.parametrize(
    "proto",
    [FixedLeader(2), two_stage_leader_election(2, threshold=2), two_stage_leader_election(3, threshold=1, final_stage="first")],
)
def test_composition(proto):
    checks = composition_checks(proto, 2)
    assert len(checks) == 1 << (2 * proto.ell)
    assert all(c.passed for c in checks)
    clean = [c for c in checks if not c.bad_blocks][0]
    # an empty lightest bin leaves no leader even without bad players
    assert clean.extractor_error <= clean.bad_leader_probability + 1e-12


def test_address_extractor_errors():
    assert address_extractor_errors(3) == pytest.approx({1: 0, 2: 0.25, 3: 0.25})
    assert address_extractor_errors(4) == pytest.approx({1: 0, 2: 0.25, 3: 0.25, 4: 0.1875})
    errs = address_extractor_errors(5)
    assert errs[1] == 0
    assert all(errs[b] == pytest.approx(0.1875) for b in range(2, 6))


def test_search_final_stage():
    res = search_final_stage(3)
    assert res.worst_bad_leader == pytest.approx(0.5)
    proto = table_protocol(3, res.table)
    assert max(exact_bad_leader_probability(proto, {j}) for j in (1, 2, 3)) == pytest.approx(0.5)


# Monte Carlo

def test_no_bad_players_always_good():
    spec = two_stage_leader_election(1024, threshold=32)
    st_ = estimate_leader_quality(spec, "crowd", 0.0, 2000, 0)
    assert st_.good_leader_frequency == 1.0
    assert st_.histogram["bad"] == 0


def test_estimate_is_seeded():
    spec = two_stage_leader_election(1024, threshold=32)
    a = estimate_leader_quality(spec, "crowd", 0.1, 2000, 3)
    b = estimate_leader_quality(spec, "crowd", 0.1, 2000, 3)
    assert a.to_json() == b.to_json()
    lo, hi = a.ci
    assert lo <= a.good_leader_frequency <= hi
    assert a.checks["max_rounds"] <= 10


def test_crowding_beats_honest_bins():
    spec = two_stage_leader_election(1024, threshold=32)
    crowd = estimate_leader_quality(spec, "crowd", 0.2, 4000, 1)
    honest = estimate_leader_quality(spec, "honest", 0.2, 4000, 1)
    assert crowd.good_leader_frequency < honest.good_leader_frequency


def test_bad_estimate_config():
    spec = two_stage_leader_election(64, threshold=8)
    with pytest.raises(ConfigError):
        estimate_leader_quality(spec, "crowd", 1.0, 10)
    with pytest.raises(ConfigError):
        estimate_leader_quality(spec, "crowd", 0.1, 10, placement="middle")


def test_collective_sampling_xor_last_bad():
    spec = xor_coin_protocol(4, 2)
    stats = collective_sampling_stats(protocol_sampler(spec, XorFixer(frozenset({4}), 3)), 2, 300, 0, target=[3])
    assert stats.target_probability == 1.0
    assert stats.max_probability == 1.0
    assert stats.min_entropy_estimate == 0.0


def test_collective_sampling_honest_spread():
    spec = xor_coin_protocol(3, 2)
    stats = collective_sampling_stats(protocol_sampler(spec, None), 2, 2000, 5)
    assert len(stats.histogram) == 4
    assert stats.max_probability < 0.3
    assert math.isclose(sum(stats.histogram.values()), 2000)
