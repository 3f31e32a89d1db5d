"""Synchronous full-information protocols and lightest-bin leader election.

A protocol is a state machine.  In every round a set of active players
broadcasts one message each; good players draw theirs uniformly and bad
players answer after seeing every good message of the round (rushing).
Messages are integers below ``2^n``; a protocol reads them modulo the
number of meaningful values in the round, so raw ``n``-bit blocks can be
fed in directly when a protocol is run on a block source.

Two simulators are provided: a player-level one that keeps identities and
transcripts, and a count-level one that only tracks how many good and bad
players survive each lightest-bin round.  The count-level one is
vectorised over trials and is what the Monte-Carlo survivor checks use.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import BudgetExceeded, ConfigError, InfeasibleError, MAX_UNIVERSE_BITS, split_blocks
from .pipelines import log_star
from .sources import Z99, GoodBlockModel, OnlineAdversary, SourceSpec, online_extraction_error, sample_inputs

DEFAULT_C0 = 3.0
DEFAULT_C1 = 1.5
MULTI_BIT_HEAD_FACTOR = 2


# ---------------------------------------------------------------------------
# lightest bin


def lightest_bin_round(choices: Mapping[int, int] | Sequence[int], bins: int) -> tuple[int, ...]:
    """Players of the least populated bin, lowest bin index on ties.

    ``choices`` maps player -> bin, or lists the bins of players ``1..p``.
    Empty bins count, so the result may be empty.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    if not isinstance(choices, Mapping):
        choices = {j + 1: c for j, c in enumerate(choices)}
    if not choices:
        raise ValueError("no active players")
    counts = [0] * bins
    for player, b in choices.items():
        if not 0 <= b < bins:
            raise ValueError(f"player {player} chose bin {b} outside [0, {bins})")
        counts[b] += 1
    target = counts.index(min(counts))
    return tuple(sorted(p for p, b in choices.items() if b == target))


def final_stage_index_election(players: Sequence[int], message: int, bits: int | None = None) -> int | None:
    """First player's message names one of the others as leader.

    ``bits`` is the message width; it must cover ``ceil(log2(p - 1))``.
    """
    p = len(players)
    if p == 0:
        return None
    if p == 1:
        return players[0]
    need = math.ceil(math.log2(p - 1)) if p > 2 else 0
    if bits is not None and bits < need:
        raise ValueError(f"index election among {p} players needs {need} bits, got {bits}")
    others = players[1:]
    return others[message % len(others)]


def bits_for(values: int) -> int:
    return max(1, math.ceil(math.log2(values))) if values > 1 else 1


# ---------------------------------------------------------------------------
# protocol specs


class ProtocolSpec:
    """Round structure of a protocol.

    Subclasses give the initial state, the active players of a state, the
    number of meaningful message values, the transition, and the outcome.
    States must be hashable.
    """

    ell: int
    n: int
    outcome_kind: str = "leader"

    def initial(self):
        raise NotImplementedError

    def active(self, state) -> tuple[int, ...]:
        raise NotImplementedError

    def values(self, state) -> int:
        return 1 << self.n

    def advance(self, state, messages: Mapping[int, int]):
        raise NotImplementedError

    def outcome(self, state):
        raise NotImplementedError

    def done(self, state) -> bool:
        return not self.active(state)

    def bins(self, state) -> int | None:
        """Bin count when the round is a lightest-bin round."""
        return None

    def to_json(self) -> dict:
        return {"kind": type(self).__name__, "ell": self.ell, "n": self.n}


@dataclass(frozen=True)
class FixedLeader(ProtocolSpec):
    """No rounds; the leader is a fixed player."""

    ell: int
    n: int = 1
    leader: int = 1

    def initial(self):
        return ()

    def active(self, state):
        return ()

    def advance(self, state, messages):
        raise RuntimeError("protocol has no rounds")

    def outcome(self, state):
        return self.leader


@dataclass(frozen=True)
class OneRoundProtocol(ProtocolSpec):
    """Every player speaks once; ``rule`` maps the message tuple to the outcome."""

    ell: int
    n: int
    rule: Callable[[tuple[int, ...]], object]
    outcome_kind: str = "leader"

    def initial(self):
        return None

    def active(self, state):
        return tuple(range(1, self.ell + 1)) if state is None else ()

    def advance(self, state, messages):
        return tuple(messages[j] & ((1 << self.n) - 1) for j in range(1, self.ell + 1))

    def outcome(self, state):
        return self.rule(state)


def xor_coin_protocol(ell: int, m: int = 1) -> OneRoundProtocol:
    """Collective sampling by XOR of one ``m``-bit message per player."""

    def rule(msgs):
        out = 0
        for v in msgs:
            out ^= v
        return out

    return OneRoundProtocol(ell, m, rule, "string" if m > 1 else "bit")


def table_protocol(ell: int, table: Sequence[int]) -> OneRoundProtocol:
    """One 1-bit round whose leader is ``table[x]`` for the message string ``x`` (player 1 = MSB)."""
    tab = tuple(int(t) for t in table)
    if len(tab) != 1 << ell:
        raise ValueError("table must cover every message string")

    def rule(msgs):
        x = 0
        for v in msgs:
            x = (x << 1) | v
        return tab[x]

    return OneRoundProtocol(ell, 1, rule)


@dataclass(frozen=True)
class TwoStageElection(ProtocolSpec):
    """Lightest-bin rounds down to a threshold, then a final stage.

    State is ``(stage, survivors, rounds_done)`` with stage one of
    ``"bins"``, ``"final"``, ``"done"``.
    """

    ell: int
    variant: str = "one_bit"
    C0: float = DEFAULT_C0
    C1: float = DEFAULT_C1
    delta: float = 0.1
    threshold: float = 0.0
    final_stage: str = "index"
    n: int = 1

    def bins_for(self, p: int) -> int:
        if self.variant == "one_bit":
            return 2
        if p < 2:
            return 2
        return max(2, int(p // math.ceil(math.log2(p)) ** self.C0))

    def continues(self, p: int) -> bool:
        if p < 2:
            return False
        if self.variant == "one_bit":
            return p > self.threshold
        return p // self.bins_for(p) >= self.threshold

    def _route(self, survivors: tuple[int, ...], rounds: int):
        if self.continues(len(survivors)):
            return ("bins", survivors, rounds)
        if self.final_stage == "index" and len(survivors) >= 2:
            return ("final", survivors, rounds)
        return ("done", survivors, rounds)

    def initial(self):
        return self._route(tuple(range(1, self.ell + 1)), 0)

    def active(self, state):
        stage, surv, _ = state
        if stage == "bins":
            return surv
        if stage == "final":
            return surv[:1]
        return ()

    def bins(self, state):
        return self.bins_for(len(state[1])) if state[0] == "bins" else None

    def values(self, state):
        stage, surv, _ = state
        if stage == "bins":
            return self.bins_for(len(surv))
        if stage == "final":
            return len(surv) - 1
        return 1

    def advance(self, state, messages):
        stage, surv, rounds = state
        if stage == "bins":
            b = self.bins_for(len(surv))
            nxt = lightest_bin_round({j: messages[j] % b for j in surv}, b)
            if not nxt:
                return ("done", (), rounds + 1)
            return self._route(nxt, rounds + 1)
        if stage == "final":
            leader = final_stage_index_election(surv, messages[surv[0]], self.n)
            return ("done", (leader,), rounds + 1)
        raise RuntimeError("protocol already finished")

    def outcome(self, state):
        surv = state[1]
        if not surv:
            return None
        if self.final_stage == "index":
            return surv[0] if len(surv) == 1 else None
        return surv[0]

    def planned_rounds(self) -> list[int]:
        """Bin counts of the stage-1 rounds when every round keeps ``floor(p / b)`` players."""
        out, p = [], self.ell
        while self.continues(p):
            b = self.bins_for(p)
            out.append(b)
            p //= b
        return out

    def final_players_bound(self) -> int:
        p = self.ell
        for b in self.planned_rounds():
            p //= b
        return p

    def to_json(self) -> dict:
        return {
            "kind": "two_stage_election",
            "ell": self.ell,
            "variant": self.variant,
            "C0": self.C0,
            "C1": self.C1,
            "delta": self.delta,
            "threshold": self.threshold,
            "final_stage": self.final_stage,
            "n": self.n,
            "planned_rounds": len(self.planned_rounds()),
        }


def _largest_final(proto: TwoStageElection) -> int:
    """Largest player count at which the lightest-bin stage can stop."""
    if not proto.continues(proto.ell):
        return proto.ell
    if proto.variant == "one_bit":
        return min(proto.ell, int(math.floor(proto.threshold)))
    p = np.arange(2, proto.ell + 1, dtype=np.int64)
    logs = np.ceil(np.log2(p)) ** proto.C0
    bins = np.maximum(2, np.floor(p / logs)).astype(np.int64)
    stop = p // bins < proto.threshold
    return int(p[stop].max()) if stop.any() else 1


def default_threshold(ell: int, variant: str, C0: float, C1: float, delta: float) -> float:
    if variant == "one_bit":
        return C0 * math.log2(ell)
    if not 0 < delta < 1:
        raise ConfigError("the multi-bit threshold needs 0 < delta < 1")
    return math.exp(math.log2(1 / delta) ** C1)


def two_stage_leader_election(
    ell: int,
    variant: str = "one_bit",
    C0: float = DEFAULT_C0,
    C1: float = DEFAULT_C1,
    delta: float = 0.1,
    threshold: float | None = None,
    final_stage: str = "index",
    strict: bool = False,
) -> TwoStageElection:
    """Build the two-stage protocol and check its round count.

    With ``strict`` a threshold of at least ``ell`` is rejected; otherwise
    such a spec simply has no lightest-bin rounds.
    """
    if ell < 2:
        raise ConfigError("need at least two players")
    if variant not in ("one_bit", "multi_bit"):
        raise ConfigError(f"unknown variant {variant!r}")
    if final_stage not in ("index", "first"):
        raise ConfigError(f"unknown final stage {final_stage!r}")
    if C0 <= 0 or C1 <= 0:
        raise ConfigError("constants must be positive")
    if threshold is None:
        threshold = default_threshold(ell, variant, C0, C1, delta)
    if strict and threshold >= ell:
        raise ConfigError(f"threshold {threshold} leaves no lightest-bin rounds for {ell} players")
    proto = TwoStageElection(ell, variant, float(C0), float(C1), float(delta), float(threshold), final_stage, 1)
    plan = proto.planned_rounds()
    width = max([bits_for(b) for b in plan] + [bits_for(max(2, _largest_final(proto)) - 1)])
    proto = TwoStageElection(ell, variant, float(C0), float(C1), float(delta), float(threshold), final_stage, width)
    if variant == "one_bit":
        if len(plan) > math.ceil(math.log2(ell)):
            raise AssertionError("one-bit plan exceeds log2(ell) rounds")
    else:
        head = sum(1 for b in plan if b > 2)
        if head > MULTI_BIT_HEAD_FACTOR * log_star(ell) + 2:
            raise AssertionError("multi-bit plan has too many shrinking rounds")
    return proto


# ---------------------------------------------------------------------------
# adversaries and runs


class PlayerAdversary:
    """Chooses bad players' messages from the round's good messages and the history."""

    bad_set: frozenset[int] = frozenset()

    def respond(self, spec: ProtocolSpec, state, round_index: int, good: Mapping[int, int], transcript) -> dict[int, int]:
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": type(self).__name__, "bad_set": sorted(self.bad_set)}


@dataclass
class FixedMessageAdversary(PlayerAdversary):
    bad_set: frozenset[int] = frozenset()
    message: int = 0

    def respond(self, spec, state, round_index, good, transcript):
        return {j: self.message for j in spec.active(state) if j in self.bad_set}


@dataclass
class FunctionPlayerAdversary(PlayerAdversary):
    bad_set: frozenset[int] = frozenset()
    fn: Callable[..., dict[int, int]] | None = None

    def respond(self, spec, state, round_index, good, transcript):
        return self.fn(spec, state, round_index, good, transcript)


@dataclass
class XorFixer(PlayerAdversary):
    """Bad players of a one-round XOR protocol force ``target``."""

    bad_set: frozenset[int] = frozenset()
    target: int = 0

    def respond(self, spec, state, round_index, good, transcript):
        bad = [j for j in spec.active(state) if j in self.bad_set]
        acc = self.target
        for v in good.values():
            acc ^= v
        return {j: (acc if i == len(bad) - 1 else 0) for i, j in enumerate(bad)}


def crowd_allocation(goods: np.ndarray, bad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Crowding of the bin with the fewest good players.

    ``goods`` is (trials, bins) and ``bad`` (trials,).  The target bin is
    filled with as many bad players as possible while staying the
    lightest bin under the lowest-index tie rule.  Returns the target bin,
    the bad players sent there and the bad players used to pad bins that
    come before it.
    """
    goods = np.asarray(goods, dtype=np.int64)
    bad = np.asarray(bad, dtype=np.int64)
    t = goods.argmin(axis=1)
    rows = np.arange(goods.shape[0])
    gt = goods[rows, t]
    before = (np.arange(goods.shape[1])[None, :] < t[:, None]).astype(np.int64)

    def cost(level):
        return np.maximum(0, level[:, None] + before - goods).sum(axis=1)

    lo, hi = gt.copy(), gt + bad + 1
    while np.any(hi - lo > 1):
        mid = (lo + hi) // 2
        ok = cost(mid) <= bad
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return t, lo - gt, cost(lo) - (lo - gt)


@dataclass
class CrowdingPlayerAdversary(PlayerAdversary):
    """Crowds the lightest bin; in the index stage it names a bad player."""

    bad_set: frozenset[int] = frozenset()

    def respond(self, spec, state, round_index, good, transcript):
        act = spec.active(state)
        bad = [j for j in act if j in self.bad_set]
        if not bad:
            return {}
        b = spec.bins(state)
        if b is not None:
            counts = np.zeros((1, b), dtype=np.int64)
            for j, v in good.items():
                counts[0, v % b] += 1
            t, x_t, _ = crowd_allocation(counts, np.array([len(bad)]))
            t, x_t = int(t[0]), int(x_t[0])
            level = int(counts[0, t]) + x_t
            out, it = {}, iter(bad)
            for j in itertools.islice(it, x_t):
                out[j] = t
            for c in range(b):
                if c == t:
                    continue
                need = max(0, level + (c < t) - int(counts[0, c]))
                for j in itertools.islice(it, need):
                    out[j] = c
            spare = (t + 1) % b
            for j in it:
                out[j] = spare
            return out
        surv = state[1] if isinstance(state, tuple) and len(state) == 3 else act
        others = list(surv[1:])
        pick = next((i for i, j in enumerate(others) if j in self.bad_set), 0)
        return {j: pick for j in bad}


@dataclass
class ProtocolRun:
    outcome: object
    transcript: list[dict[int, int]]
    survivors: list[int]

    def transcript_lines(self) -> list[str]:
        """JSON lines with round, player and hex message."""
        out = []
        for i, msgs in enumerate(self.transcript, start=1):
            for j in sorted(msgs):
                out.append(json.dumps({"round": i, "player": j, "message": format(msgs[j], "x")}))
        return out


def run_protocol(spec: ProtocolSpec, adversary: PlayerAdversary | None, rng_seed: int) -> ProtocolRun:
    """One execution; good messages are uniform, bad ones come after them."""
    rng = np.random.default_rng(rng_seed)
    bad_set = adversary.bad_set if adversary is not None else frozenset()
    if any(not 1 <= j <= spec.ell for j in bad_set):
        raise ValueError("bad players must lie in [1, ell]")
    state = spec.initial()
    transcript: list[dict[int, int]] = []
    survivors = []
    limit = 1 << spec.n
    while not spec.done(state):
        act = spec.active(state)
        survivors.append(len(act))
        vals = spec.values(state)
        good = {j: int(rng.integers(vals)) for j in act if j not in bad_set}
        need = [j for j in act if j in bad_set]
        bad = adversary.respond(spec, state, len(transcript) + 1, dict(good), list(transcript)) if need else {}
        if sorted(bad) != need:
            raise ValueError(f"adversary answered for {sorted(bad)}, expected {need}")
        if any(not 0 <= v < limit for v in bad.values()):
            raise ValueError("adversary message outside the message space")
        msgs = {**good, **bad}
        transcript.append(dict(sorted(msgs.items())))
        state = spec.advance(state, msgs)
    return ProtocolRun(spec.outcome(state), transcript, survivors)


def exact_adversary_value(
    spec: ProtocolSpec,
    bad_set: frozenset[int] | set[int],
    payoff: Callable[[object], float],
    raw: bool = False,
    budget: int = 2_000_000,
) -> float:
    """Largest expected payoff a rushing adversary on ``bad_set`` can force.

    Good messages range over the meaningful values of each round, or over
    all ``2^n`` raw values when ``raw`` is set.
    """
    bad_set = frozenset(bad_set)
    work = [0]

    @lru_cache(maxsize=None)
    def value(state):
        act = spec.active(state)
        if not act:
            return float(payoff(spec.outcome(state)))
        vals = (1 << spec.n) if raw else spec.values(state)
        good = [j for j in act if j not in bad_set]
        bad = [j for j in act if j in bad_set]
        work[0] += vals ** len(act)
        if work[0] > budget:
            raise BudgetExceeded("exhaustive protocol adversary exceeds the budget")
        total = 0.0
        for gm in itertools.product(range(vals), repeat=len(good)):
            base = dict(zip(good, gm))
            if bad:
                total += max(
                    value(spec.advance(state, {**base, **dict(zip(bad, bm))}))
                    for bm in itertools.product(range(vals), repeat=len(bad))
                )
            else:
                total += value(spec.advance(state, base))
        return total / vals ** len(good)

    return value(spec.initial())


def exact_bad_leader_probability(spec: ProtocolSpec, bad_set, raw: bool = False, budget: int = 2_000_000) -> float:
    """Worst-case probability that the leader is bad or missing."""
    bad_set = frozenset(bad_set)
    return exact_adversary_value(spec, bad_set, lambda o: float(o is None or o in bad_set), raw, budget)


# ---------------------------------------------------------------------------
# extractors from protocols


def extractor_from_protocol(spec: ProtocolSpec, blocks: Sequence[int], r: int) -> int:
    """Run ``spec`` on rounds ``1..r-1`` of the blocks and output the leader's last block.

    Block ``(i, j)`` sits at position ``(i - 1) * ell + j``.  A missing
    leader gives 0.
    """
    ell = spec.ell
    if len(blocks) != ell * r:
        raise ValueError(f"expected {ell * r} blocks, got {len(blocks)}")
    state = spec.initial()
    i = 0
    while not spec.done(state):
        if i >= r - 1:
            raise InfeasibleError("protocol needs more rounds than the source provides")
        msgs = {j: int(blocks[i * ell + j - 1]) for j in spec.active(state)}
        state = spec.advance(state, msgs)
        i += 1
    leader = spec.outcome(state)
    if leader is None:
        return 0
    return int(blocks[(r - 1) * ell + leader - 1])


def composed_extractor_table(spec: ProtocolSpec, r: int) -> np.ndarray:
    """Truth table of :func:`extractor_from_protocol` over all ``ell * r`` blocks."""
    count = spec.ell * r
    total = count * spec.n
    if total > MAX_UNIVERSE_BITS:
        raise BudgetExceeded("composed extractor too large to tabulate")
    return np.array(
        [extractor_from_protocol(spec, split_blocks(x, count, spec.n), r) for x in range(1 << total)],
        dtype=np.int64,
    )


@dataclass
class CompositionCheck:
    bad_blocks: frozenset[int]
    bad_players: frozenset[int]
    extractor_error: float
    bad_leader_probability: float

    @property
    def passed(self) -> bool:
        return self.extractor_error <= self.bad_leader_probability + 1e-12


def composition_checks(spec: ProtocolSpec, r: int) -> list[CompositionCheck]:
    """Exact extractor error against exact bad-leader probability for every bad-block set."""
    table = composed_extractor_table(spec, r)
    count = spec.ell * r
    out = []
    for mask in range(1 << count):
        bad_blocks = frozenset(b + 1 for b in range(count) if mask >> b & 1)
        players = frozenset((b - 1) % spec.ell + 1 for b in bad_blocks)
        err = online_extraction_error(table, SourceSpec(count, spec.n, bad_blocks), spec.n)
        prob = exact_bad_leader_probability(spec, players, raw=True)
        out.append(CompositionCheck(bad_blocks, players, err, prob))
    return out


def address_extractor(blocks: Sequence[int], ell: int, n: int) -> int:
    """Block 1 names one of blocks ``2..ell``; that block is the output.

    When ``ell - 1`` is not a power of two, an out-of-range address ``v``
    takes output bit ``t`` (MSB first) from bit ``t`` of block
    ``2 + ((v + t) mod (ell - 1))``.
    """
    if len(blocks) != ell:
        raise ValueError("wrong block count")
    v = int(blocks[0])
    if v < ell - 1:
        return int(blocks[1 + v])
    out = 0
    for t in range(n):
        src = int(blocks[1 + (v + t) % (ell - 1)])
        out = (out << 1) | (src >> (n - 1 - t) & 1)
    return out


def address_extractor_table(ell: int) -> tuple[np.ndarray, int]:
    """Truth table and block width ``ceil(log2(ell - 1))`` of the address extractor."""
    if ell < 3:
        raise ValueError("need at least three blocks")
    n = math.ceil(math.log2(ell - 1))
    total = ell * n
    if total > MAX_UNIVERSE_BITS:
        raise BudgetExceeded("address extractor too large to tabulate")
    table = np.array([address_extractor(split_blocks(x, ell, n), ell, n) for x in range(1 << total)], dtype=np.int64)
    return table, n


def address_extractor_errors(ell: int) -> dict[int, float]:
    """Exact online error with each single bad block."""
    table, n = address_extractor_table(ell)
    return {b: online_extraction_error(table, SourceSpec(ell, n, frozenset({b})), n) for b in range(1, ell + 1)}


# ---------------------------------------------------------------------------
# Monte Carlo statistics


@dataclass
class RunStats:
    """Monte-Carlo summary of many protocol executions."""

    trials: int
    good_leader_frequency: float
    ci_half_width: float
    survivors_mean: list[float]
    survivors_min: list[int]
    good_mean: list[float]
    good_min: list[int]
    histogram: dict[str, int]
    checks: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def ci(self) -> tuple[float, float]:
        f = self.good_leader_frequency
        return max(0.0, f - self.ci_half_width), min(1.0, f + self.ci_half_width)

    def rows(self) -> list[dict]:
        return [
            {
                "round": i,
                "survivors_mean": self.survivors_mean[i],
                "survivors_min": self.survivors_min[i],
                "good_mean": self.good_mean[i],
                "good_min": self.good_min[i],
            }
            for i in range(len(self.survivors_mean))
        ]

    def to_json(self) -> dict:
        lo, hi = self.ci
        return {
            "trials": self.trials,
            "good_leader_frequency": self.good_leader_frequency,
            "ci_low": lo,
            "ci_high": hi,
            "histogram": dict(self.histogram),
            "checks": dict(self.checks),
            "rounds": self.rows(),
            "config": self.config,
        }


def _ci(freq: float, trials: int) -> float:
    return Z99 * math.sqrt(max(freq * (1 - freq), 0.0) / trials)


@dataclass
class SurvivorTrace:
    """Per-round good and total survivor counts, ``-1`` once a trial has stopped."""

    good: np.ndarray
    total: np.ndarray
    bins: np.ndarray
    rounds: np.ndarray

    @property
    def bad(self) -> np.ndarray:
        return np.where(self.total >= 0, self.total - self.good, -1)


def simulate_survivors(
    spec: TwoStageElection, bad: int, trials: int, rng_seed: int, adversary: str = "crowd"
) -> SurvivorTrace:
    """Count-level lightest-bin stage, vectorised over trials.

    ``adversary`` is ``"crowd"`` (fill the bin with the fewest good players)
    or ``"honest"`` (bad players choose bins uniformly).  Column ``i`` of the
    trace holds the counts after ``i`` rounds.
    """
    if adversary not in ("crowd", "honest"):
        raise ConfigError(f"unknown adversary {adversary!r}")
    if not 0 <= bad <= spec.ell:
        raise ValueError("bad count out of range")
    rng = np.random.default_rng(rng_seed)
    G = np.full(trials, spec.ell - bad, dtype=np.int64)
    B = np.full(trials, bad, dtype=np.int64)
    goods, totals, binss = [G.copy()], [G + B], []
    rounds = np.zeros(trials, dtype=np.int64)
    cont = np.vectorize(spec.continues, otypes=[bool])
    bins_of = np.vectorize(spec.bins_for, otypes=[np.int64])
    live = cont(G + B)
    while live.any():
        P = G + B
        bins = np.where(live, bins_of(np.maximum(P, 2)), 0)
        for b in np.unique(bins[live]):
            idx = np.flatnonzero(live & (bins == b))
            pv = np.full(b, 1.0 / b)
            gc = rng.multinomial(G[idx], pv)
            if adversary == "crowd":
                t, x_t, _ = crowd_allocation(gc, B[idx])
                G[idx] = gc[np.arange(idx.size), t]
                B[idx] = x_t
            else:
                bc = rng.multinomial(B[idx], pv)
                tot = gc + bc
                t = tot.argmin(axis=1)
                G[idx] = gc[np.arange(idx.size), t]
                B[idx] = bc[np.arange(idx.size), t]
        rounds += live
        goods.append(np.where(live, G, -1))
        totals.append(np.where(live, G + B, -1))
        binss.append(bins)
        live = live & cont(G + B)
    if not binss:
        binss.append(np.zeros(trials, dtype=np.int64))
    return SurvivorTrace(np.stack(goods, 1), np.stack(totals, 1), np.stack(binss, 1), rounds)


def _final_good(spec: TwoStageElection, G: np.ndarray, B: np.ndarray, placement: str, rng) -> np.ndarray:
    """Whether the final stage elects a good leader, given survivor counts."""
    P = G + B
    if placement == "low":
        first_bad = B > 0
    else:
        first_bad = rng.random(P.size) * np.maximum(P, 1) < B
    if spec.final_stage == "first":
        return (P > 0) & ~first_bad
    others_bad = B - first_bad
    pick_bad = rng.random(P.size) * np.maximum(P - 1, 1) < others_bad
    good = np.where(first_bad, others_bad == 0, ~pick_bad)
    good = np.where(P == 1, B == 0, good)
    return good & (P > 0)


def survivor_claims(spec: TwoStageElection, trace: SurvivorTrace, g: int) -> dict[str, float]:
    """Fractions of trials meeting the survivor lower bounds."""
    out: dict[str, float] = {}
    good = trace.good.astype(np.float64)
    rounds = trace.rounds
    cols = good.shape[1]
    stopped = good < 0
    if spec.variant == "one_bit":
        i = np.arange(1, cols + 1)
        mu = g / 2.0 ** i
        bound = mu - 5 * np.cbrt(mu) ** 2
        # stated indexing: g_i for i = 1..r+1, where g_1 = g
        stated = (good >= bound[None, :]) | stopped
        out["survivor_stated"] = float(stated.all(axis=1).mean())
        mu0 = g / 2.0 ** np.arange(cols)
        derived = (good >= (mu0 - 5 * np.cbrt(mu0) ** 2)[None, :]) | stopped
        out["survivor_shifted"] = float(derived.all(axis=1).mean())
        r_max = int(rounds.max()) if rounds.size else 0
        out["survivor_target"] = 1 - math.exp(-(g / 2.0 ** r_max) / 10)
    else:
        prod = np.cumprod(np.where(trace.bins > 0, trace.bins, 1).astype(np.float64), axis=1)
        mu = g / prod
        bound = mu - 2 * np.cbrt(mu) ** 2
        ok = (good[:, 1:] >= bound) | stopped[:, 1:]
        out["survivor_multi"] = float(ok.all(axis=1).mean())
    last = trace.good[np.arange(good.shape[0]), rounds]
    total = trace.total[np.arange(good.shape[0]), rounds]
    frac = np.where(total > 0, last / np.maximum(total, 1), 0.0)
    slack = 5 * np.cbrt(np.maximum(total, 1).astype(np.float64)) ** -1
    out["good_fraction"] = float((frac >= 1 - spec.delta - slack).mean())
    return out


def estimate_leader_quality(
    spec: TwoStageElection,
    adversary: str = "crowd",
    delta: float | None = None,
    trials: int = 100_000,
    rng_seed: int = 0,
    placement: str = "random",
) -> RunStats:
    """Monte-Carlo good-leader frequency with survivor trajectories.

    ``floor(delta * ell)`` players are bad.  ``placement`` fixes where bad
    players sit in the survivor order seen by the final stage: ``"low"``
    puts them first, ``"random"`` places them uniformly.
    """
    delta = spec.delta if delta is None else delta
    if not 0 <= delta < 1:
        raise ConfigError("delta must lie in [0, 1)")
    if placement not in ("low", "random"):
        raise ConfigError(f"unknown placement {placement!r}")
    bad = int(math.floor(delta * spec.ell + 1e-12))
    g = spec.ell - bad
    trace = simulate_survivors(spec, bad, trials, rng_seed, adversary)
    rows = np.arange(trials)
    G = trace.good[rows, trace.rounds]
    B = trace.bad[rows, trace.rounds]
    rng = np.random.default_rng([rng_seed, 1])
    good = _final_good(spec, G, B, placement, rng)
    freq = float(good.mean())
    P = G + B
    hist = {"good": int(good.sum()), "bad": int(((~good) & (P > 0)).sum()), "none": int((P == 0).sum())}
    s_mean, s_min, g_mean, g_min = [], [], [], []
    for c in range(trace.total.shape[1]):
        col = trace.total[:, c]
        live = col >= 0
        if not live.any():
            break
        s_mean.append(float(col[live].mean()))
        s_min.append(int(col[live].min()))
        g_mean.append(float(trace.good[live, c].mean()))
        g_min.append(int(trace.good[live, c].min()))
    checks = survivor_claims(spec, trace, g)
    checks["max_rounds"] = float(trace.rounds.max())
    checks["eps_reference"] = delta + 12 * delta ** 1.5 + math.log2(spec.ell) ** (-1 / 3)
    config = {
        "protocol": spec.to_json(),
        "adversary": adversary,
        "delta": delta,
        "bad": bad,
        "trials": trials,
        "rng_seed": rng_seed,
        "placement": placement,
    }
    return RunStats(trials, freq, _ci(freq, trials), s_mean, s_min, g_mean, g_min, hist, checks, config)


@dataclass
class SamplingStats:
    trials: int
    m: int
    histogram: dict[int, int]
    max_probability: float
    min_entropy_estimate: float
    ci_half_width: float
    target_probability: float | None = None

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "m": self.m,
            "histogram": {format(k, "x"): v for k, v in sorted(self.histogram.items())},
            "max_probability": self.max_probability,
            "min_entropy_estimate": self.min_entropy_estimate,
            "ci_half_width": self.ci_half_width,
            "target_probability": self.target_probability,
            "note": "plug-in estimate; the interval is on the largest cell only",
        }


def collective_sampling_stats(
    sampler: Callable[[int, int], np.ndarray],
    m: int,
    trials: int,
    rng_seed: int = 0,
    target: Sequence[int] | None = None,
) -> SamplingStats:
    """Histogram statistics of ``m``-bit outcomes drawn by ``sampler(trials, seed)``."""
    out = np.asarray(sampler(trials, rng_seed), dtype=np.int64)
    if out.shape != (trials,) or out.min(initial=0) < 0 or out.max(initial=0) >= 1 << m:
        raise ValueError("sampler must return trials outcomes in [0, 2^m)")
    counts = np.bincount(out, minlength=1 << m)
    pmax = float(counts.max() / trials)
    hist = {int(k): int(c) for k, c in enumerate(counts) if c}
    tp = None
    if target is not None:
        tp = float(np.isin(out, np.asarray(list(target))).mean())
    return SamplingStats(trials, m, hist, pmax, -math.log2(pmax), _ci(pmax, trials), tp)


def condenser_sampler(cond, spec: SourceSpec, adversary: OnlineAdversary | None, goods: GoodBlockModel | None = None):
    """Sampler running a tabulated block function on sampled source inputs."""
    table = np.asarray(cond, dtype=np.int64)

    def sample(trials, seed):
        blocks = sample_inputs(spec, adversary, goods, trials, seed)
        x = np.zeros(trials, dtype=np.int64)
        for c in range(spec.ell):
            x = (x << spec.n) | blocks[:, c]
        return table[x]

    return sample


def protocol_sampler(spec: ProtocolSpec, adversary: PlayerAdversary | None):
    """Sampler running the protocol once per trial with derived seeds."""

    def sample(trials, seed):
        ss = np.random.SeedSequence(seed)
        return np.array(
            [int(run_protocol(spec, adversary, int(c.generate_state(1)[0])).outcome) for c in ss.spawn(trials)],
            dtype=np.int64,
        )

    return sample


# ---------------------------------------------------------------------------
# final-stage search


@dataclass
class FinalStageSearch:
    table: tuple[int, ...]
    worst_bad_leader: float
    candidates: int


def search_final_stage(ell: int, tries: int = 20_000, rng_seed: int = 0, bad_size: int = 1) -> FinalStageSearch:
    """Best one-round 1-bit election table against every bad coalition of ``bad_size``.

    Tables are enumerated when there are at most ``tries`` of them, and
    sampled otherwise.
    """
    if not 2 <= ell <= 4:
        raise ValueError("final-stage search supports 2 to 4 players")
    size = 1 << ell
    coalitions = [frozenset(c) for c in itertools.combinations(range(1, ell + 1), bad_size)]
    space = ell ** size
    if space <= tries:
        cands = itertools.product(range(1, ell + 1), repeat=size)
    else:
        rng = np.random.default_rng(rng_seed)
        cands = (tuple(int(v) for v in rng.integers(1, ell + 1, size)) for _ in range(tries))
    best, score, seen = None, math.inf, 0
    for tab in cands:
        seen += 1
        proto = table_protocol(ell, tab)
        worst = 0.0
        for c in coalitions:
            worst = max(worst, exact_bad_leader_probability(proto, c))
            if worst >= score:
                break
        if worst < score:
            best, score = tab, worst
    return FinalStageSearch(best, score, seen)
