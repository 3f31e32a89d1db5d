"""Online sources with bad blocks and exact adversary analysis.

A source has ``l`` blocks of ``n`` bits.  Good blocks are independent draws
from a good-block model (uniform, or flat on a fixed support).  Bad blocks
are chosen by an online adversary that sees only earlier blocks.  Block 1
is the most significant part of the concatenated input, so the value of
the first ``j - 1`` blocks is ``x >> ((l - j + 1) * n)``.

Exact quantities are computed by backward induction over the blocks: the
last block is reduced first (max or min at bad blocks, average at good
blocks), which is valid because an online adversary at block ``j`` may
condition on exactly the prefix that is still unreduced.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .boolfn import BooleanFunction
from .core import (
    BudgetExceeded,
    MAX_UNIVERSE_BITS,
    concat_blocks,
    default_budget,
    smooth_cap,
    split_blocks,
)

Z99 = 2.5758293035489004


@dataclass(frozen=True)
class SourceSpec:
    """Block layout and bad-block positions (1-based)."""

    ell: int
    n: int
    bad_set: frozenset[int] = frozenset()
    k: float | None = None

    def __post_init__(self):
        if self.ell < 1 or self.n < 1:
            raise ValueError("need at least one block of at least one bit")
        bad = frozenset(int(b) for b in self.bad_set)
        if any(not 1 <= b <= self.ell for b in bad):
            raise ValueError(f"bad blocks must lie in [1, {self.ell}]")
        object.__setattr__(self, "bad_set", bad)
        if self.k is not None and not 0 <= self.k <= self.n:
            raise ValueError("good-block entropy must lie in [0, n]")

    @property
    def g(self) -> int:
        return self.ell - len(self.bad_set)

    @property
    def good_set(self) -> tuple[int, ...]:
        return tuple(j for j in range(1, self.ell + 1) if j not in self.bad_set)

    @property
    def total_bits(self) -> int:
        return self.ell * self.n

    def to_json(self) -> dict:
        return {"ell": self.ell, "n": self.n, "g": self.g, "k": self.k, "bad_set": sorted(self.bad_set)}

    @classmethod
    def from_json(cls, doc: Mapping) -> "SourceSpec":
        spec = cls(int(doc["ell"]), int(doc["n"]), frozenset(doc.get("bad_set", ())), doc.get("k"))
        if "g" in doc and int(doc["g"]) != spec.g:
            raise ValueError("g disagrees with the bad set")
        return spec


@dataclass(frozen=True)
class GoodBlockModel:
    """Distribution of good blocks: uniform or flat on explicit supports.

    ``supports`` maps a block index to the list of values it is uniform on;
    blocks not listed use ``default_support`` (``None`` meaning uniform).
    """

    default_support: tuple[int, ...] | None = None
    supports: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def uniform(cls) -> "GoodBlockModel":
        return cls()

    @classmethod
    def flat(cls, k: int) -> "GoodBlockModel":
        """Flat on the lexicographically first ``2**k`` strings."""
        return cls(tuple(range(1 << k)))

    def support(self, j: int, n: int) -> np.ndarray:
        s = self.supports.get(j, self.default_support)
        if s is None:
            return np.arange(1 << n, dtype=np.int64)
        arr = np.asarray(s, dtype=np.int64)
        if arr.size == 0 or arr.max() >= 1 << n or len(set(arr.tolist())) != arr.size:
            raise ValueError(f"bad support for block {j}")
        return arr


# ---------------------------------------------------------------------------
# adversaries


class OnlineAdversary:
    """Chooses each bad block from the blocks before it."""

    def respond(self, j: int, prefix: tuple[int, ...], n: int) -> int:
        raise NotImplementedError

    def table(self, j: int, n: int, budget: int | None = None) -> np.ndarray:
        """Response at block ``j`` for every possible prefix value."""
        budget = default_budget() if budget is None else budget
        size = 1 << ((j - 1) * n)
        if size > budget:
            raise BudgetExceeded(f"adversary table with {size} entries exceeds budget")
        return np.array(
            [self.respond(j, split_blocks(p, j - 1, n), n) for p in range(size)], dtype=np.int64
        )


@dataclass
class TableAdversary(OnlineAdversary):
    """Strategy stored as one lookup table per bad block, keyed by prefix value."""

    tables: dict[int, np.ndarray]

    def respond(self, j, prefix, n):
        return int(self.tables[j][concat_blocks(prefix, n)])

    def table(self, j, n, budget=None):
        return np.asarray(self.tables[j], dtype=np.int64)

    def to_json(self) -> dict:
        return {"kind": "table", "tables": {str(j): t.tolist() for j, t in self.tables.items()}}

    @classmethod
    def from_json(cls, doc) -> "TableAdversary":
        return cls({int(j): np.asarray(t, dtype=np.int64) for j, t in doc["tables"].items()})


@dataclass
class FunctionAdversary(OnlineAdversary):
    fn: Callable[[int, tuple[int, ...]], int]

    def respond(self, j, prefix, n):
        return int(self.fn(j, prefix)) & ((1 << n) - 1)


@dataclass
class CrowdingAdversary(OnlineAdversary):
    """Pushes every bad block to a fixed target (all ones by default)."""

    target: int | None = None

    def respond(self, j, prefix, n):
        return (1 << n) - 1 if self.target is None else self.target

    def table(self, j, n, budget=None):
        return np.full(1 << ((j - 1) * n), self.respond(j, (), n), dtype=np.int64)


@dataclass
class RandomAdversary(OnlineAdversary):
    """Arbitrary but fixed function of the prefix, derived from a seed."""

    seed: int = 0

    def respond(self, j, prefix, n):
        key = f"{self.seed}:{j}:{','.join(map(str, prefix))}".encode()
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return int.from_bytes(digest, "little") & ((1 << n) - 1)


# ---------------------------------------------------------------------------
# realisation and sampling


def realize(spec: SourceSpec, adversary: OnlineAdversary | None, good_values: Mapping[int, int]) -> tuple[int, ...]:
    """Fill in bad blocks in index order given the good block values."""
    blocks: list[int] = []
    for j in range(1, spec.ell + 1):
        if j in spec.bad_set:
            if adversary is None:
                raise ValueError("bad blocks need an adversary")
            v = adversary.respond(j, tuple(blocks), spec.n)
            if not 0 <= v < 1 << spec.n:
                raise ValueError(f"adversary produced out-of-range block {v}")
        else:
            v = int(good_values[j])
        blocks.append(v)
    return tuple(blocks)


def sample_good_blocks(spec: SourceSpec, goods: GoodBlockModel, rng: np.random.Generator) -> dict[int, int]:
    return {j: int(rng.choice(goods.support(j, spec.n))) for j in spec.good_set}


def sample_source(
    spec: SourceSpec,
    adversary: OnlineAdversary | None = None,
    goods: GoodBlockModel | None = None,
    rng_seed: int = 0,
) -> tuple[int, ...]:
    goods = goods or GoodBlockModel.uniform()
    rng = np.random.default_rng(rng_seed)
    return realize(spec, adversary, sample_good_blocks(spec, goods, rng))


def _check_bits(spec: SourceSpec) -> None:
    if spec.total_bits > MAX_UNIVERSE_BITS:
        raise BudgetExceeded(f"{spec.total_bits} input bits exceed the exact-analysis cap")


def realized_inputs(
    spec: SourceSpec,
    adversary: OnlineAdversary | None,
    goods: GoodBlockModel | None = None,
    budget: int | None = None,
) -> np.ndarray:
    """All equally likely realised inputs (as concatenated integers)."""
    goods = goods or GoodBlockModel.uniform()
    supports = [goods.support(j, spec.n) for j in spec.good_set]
    count = math.prod(s.size for s in supports)
    budget = default_budget() if budget is None else budget
    if count > budget:
        raise BudgetExceeded(f"{count} good-block assignments exceed budget")
    x = np.zeros(1, dtype=np.int64)
    # build raw inputs with good blocks filled and bad blocks zero
    good_iter = iter(supports)
    for j in range(1, spec.ell + 1):
        if j in spec.bad_set:
            x = x << spec.n
        else:
            s = next(good_iter)
            x = ((x[:, None] << spec.n) | s[None, :]).reshape(-1)
    for j in sorted(spec.bad_set):
        shift = (spec.ell - j) * spec.n
        prefix = x >> (shift + spec.n)
        tab = adversary.table(j, spec.n, budget)
        x = x | (tab[prefix] << shift)
    return x


def exact_expectation(f, spec: SourceSpec, adversary: OnlineAdversary | None, goods: GoodBlockModel | None = None) -> float:
    """``E f(X)`` for a concrete adversary, by enumerating good blocks."""
    values = _values(f, spec)
    return float(values[realized_inputs(spec, adversary, goods)].mean())


def output_distribution(cond, spec: SourceSpec, adversary, m: int, goods: GoodBlockModel | None = None) -> np.ndarray:
    """Distribution of an ``m``-bit block function under a concrete adversary."""
    values = np.asarray(cond, dtype=np.int64)
    out = values[realized_inputs(spec, adversary, goods)]
    return np.bincount(out, minlength=1 << m) / out.size


# ---------------------------------------------------------------------------
# backward induction


def _values(f, spec: SourceSpec) -> np.ndarray:
    _check_bits(spec)
    if isinstance(f, BooleanFunction):
        arr = f.table.astype(np.float64)
    else:
        arr = np.asarray(f, dtype=np.float64)
    if arr.shape != (1 << spec.total_bits,):
        raise ValueError(f"function must be tabulated on {spec.total_bits} bits")
    return arr


@dataclass
class BiasReport:
    """Optimal online bias of a function under a fixed bad set."""

    max_e: float
    min_e: float
    uniform_e: float
    oi_b: float
    max_policy: TableAdversary
    min_policy: TableAdversary

    @property
    def direction(self) -> str:
        return "up" if self.max_e - self.uniform_e >= self.uniform_e - self.min_e else "down"

    @property
    def policy(self) -> TableAdversary:
        return self.max_policy if self.direction == "up" else self.min_policy


def backward_induction(values, spec: SourceSpec, goods: GoodBlockModel | None, maximize: bool):
    """Optimal value and policy tables for maximising or minimising ``E f``.

    ``values`` may carry extra leading axes, which are handled in parallel
    (one independent game per leading index).
    """
    goods = goods or GoodBlockModel.uniform()
    v = np.asarray(values, dtype=np.float64)
    lead = v.shape[:-1]
    width = 1 << spec.n
    policy: dict[int, np.ndarray] = {}
    for j in range(spec.ell, 0, -1):
        v = v.reshape(*lead, -1, width)
        if j in spec.bad_set:
            idx = np.argmax(v, axis=-1) if maximize else np.argmin(v, axis=-1)
            policy[j] = idx
            v = np.take_along_axis(v, idx[..., None], axis=-1)[..., 0]
        else:
            v = v[..., goods.support(j, spec.n)].mean(axis=-1)
    return v.reshape(lead), policy


def optimal_online_bias(f, spec: SourceSpec, goods: GoodBlockModel | None = None) -> BiasReport:
    """Largest shift of ``E f`` an online adversary on ``spec.bad_set`` can force."""
    values = _values(f, spec)
    hi, hi_pol = backward_induction(values, spec, goods, True)
    lo, lo_pol = backward_induction(values, spec, goods, False)
    base = float(values.mean())
    hi, lo = float(hi), float(lo)
    return BiasReport(
        hi, lo, base, max(hi - base, base - lo),
        TableAdversary({j: t.astype(np.int64) for j, t in hi_pol.items()}),
        TableAdversary({j: t.astype(np.int64) for j, t in lo_pol.items()}),
    )


def brute_force_bias(f, spec: SourceSpec, goods: GoodBlockModel | None = None, budget: int = 100_000) -> tuple[float, float]:
    """Max and min ``E f`` over every deterministic table strategy.

    Serves as an oracle for :func:`optimal_online_bias` on tiny sources.
    """
    values = _values(f, spec)
    goods = goods or GoodBlockModel.uniform()
    bad = sorted(spec.bad_set)
    shapes = [1 << ((j - 1) * spec.n) for j in bad]
    total = math.prod((1 << spec.n) ** s for s in shapes)
    if total > budget:
        raise BudgetExceeded(f"{total} strategies exceed brute-force budget")
    good_assign = list(itertools.product(*[goods.support(j, spec.n).tolist() for j in spec.good_set]))
    choices = [list(itertools.product(range(1 << spec.n), repeat=s)) for s in shapes]
    best, worst = -math.inf, math.inf
    for combo in itertools.product(*choices):
        tables = dict(zip(bad, combo))
        acc = 0.0
        for assign in good_assign:
            gv = dict(zip(spec.good_set, assign))
            x = 0
            for j in range(1, spec.ell + 1):
                blk = tables[j][x] if j in tables else gv[j]
                x = (x << spec.n) | blk
            acc += values[x]
        e = acc / len(good_assign)
        best, worst = max(best, e), min(worst, e)
    return best, worst


def point_mass_envelope(cond, spec: SourceSpec, m: int, goods: GoodBlockModel | None = None) -> np.ndarray:
    """``P_max(z)``: largest probability any online adversary puts on ``z``.

    Different ``z`` may need different adversaries, so the envelope bounds
    every single adversary's output distribution from above pointwise.
    """
    _check_bits(spec)
    c = np.asarray(cond, dtype=np.int64)
    if c.shape != (1 << spec.total_bits,):
        raise ValueError("block function must be tabulated on all inputs")
    if c.min() < 0 or c.max() >= 1 << m:
        raise ValueError(f"block function values must fit in {m} bits")
    out = np.empty(1 << m)
    # games for several z at once, bounded in memory
    step = max(1, (1 << 22) >> spec.total_bits)
    for lo in range(0, 1 << m, step):
        zs = np.arange(lo, min(lo + step, 1 << m))
        ind = (c[None, :] == zs[:, None]).astype(np.float64)
        val, _ = backward_induction(ind, spec, goods, True)
        out[zs] = val
    return out


def worst_case_point_mass(cond, spec: SourceSpec, m: int, goods: GoodBlockModel | None = None) -> tuple[int, float]:
    env = point_mass_envelope(cond, spec, m, goods)
    z = int(np.argmax(env))
    return z, float(env[z])


def certified_smooth_entropy(cond, spec: SourceSpec, m: int, eps: float, goods: GoodBlockModel | None = None) -> float:
    """Lower bound on the ``eps``-smooth min-entropy valid for every adversary."""
    env = point_mass_envelope(cond, spec, m, goods)
    return -math.log2(float(smooth_cap(env, eps)[0]))


def _test_set_values(cond, spec: SourceSpec, m: int, goods: GoodBlockModel | None):
    """Largest probability an online adversary gives each non-empty test set.

    Returns ``(sizes, values)`` over all non-empty subsets of ``{0,1}^m``.
    """
    if m > 4:
        raise BudgetExceeded("test-set enumeration is limited to 4 output bits")
    _check_bits(spec)
    c = np.asarray(cond, dtype=np.int64)
    if c.shape != (1 << spec.total_bits,):
        raise ValueError("block function must be tabulated on all inputs")
    sets = np.arange(1, 1 << (1 << m))
    member = ((sets[:, None] >> np.arange(1 << m)[None, :]) & 1).astype(np.float64)
    values = np.empty(sets.size)
    step = max(1, (1 << 23) >> spec.total_bits)
    for lo in range(0, sets.size, step):
        ind = member[lo : lo + step][:, c]
        val, _ = backward_induction(ind, spec, goods, True)
        values[lo : lo + step] = val
    return member.sum(axis=1), values


def online_extraction_error(cond, spec: SourceSpec, m: int, goods: GoodBlockModel | None = None) -> float:
    """Exact worst-case distance from uniform over all online adversaries.

    Distance equals the best test-set advantage, and for a fixed test set
    the best adversary is found by backward induction.
    """
    sizes, values = _test_set_values(cond, spec, m, goods)
    return float(max(0.0, (values - sizes / (1 << m)).max()))


def worst_case_smooth_entropy(cond, spec: SourceSpec, m: int, eps: float, goods: GoodBlockModel | None = None) -> float:
    """Exact least ``eps``-smooth min-entropy over all online adversaries.

    The smoothing cap of a distribution is ``max_T (P(T) - eps) / |T|``
    (floored at ``2^-m``), and the maximum over adversaries commutes with
    the maximum over test sets ``T``.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    sizes, values = _test_set_values(cond, spec, m, goods)
    cap = max(2.0 ** -m, float(((values - eps) / sizes).max()))
    return -math.log2(cap)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    baseline: float
    bias: float
    half_width: float
    trials: int

    @property
    def ci(self) -> tuple[float, float]:
        return self.bias - self.half_width, self.bias + self.half_width


def sample_inputs(
    spec: SourceSpec,
    adversary: OnlineAdversary | None,
    goods: GoodBlockModel | None,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Sampled block matrix (trials x blocks), vectorised over trials.

    Table-backed adversaries are applied by lookup; others are called per
    trial.  Good blocks come from one generator seeded by ``seed``.
    """
    goods = goods or GoodBlockModel.uniform()
    rng = np.random.default_rng(seed)
    blocks = np.zeros((trials, spec.ell), dtype=np.int64)
    for j in spec.good_set:
        blocks[:, j - 1] = rng.choice(goods.support(j, spec.n), size=trials)
    for j in sorted(spec.bad_set):
        if isinstance(adversary, (TableAdversary, CrowdingAdversary)) and (j - 1) * spec.n <= 26:
            tab = adversary.table(j, spec.n)
            prefix = np.zeros(trials, dtype=np.int64)
            for c in range(j - 1):
                prefix = (prefix << spec.n) | blocks[:, c]
            blocks[:, j - 1] = tab[prefix]
        else:
            for t in range(trials):
                blocks[t, j - 1] = adversary.respond(j, tuple(int(v) for v in blocks[t, : j - 1]), spec.n)
    return blocks


def monte_carlo_bias(
    f,
    spec: SourceSpec,
    adversary: OnlineAdversary | None,
    trials: int,
    seed: int = 0,
    goods: GoodBlockModel | None = None,
    baseline: float | None = None,
) -> MonteCarloEstimate:
    """Estimated bias ``|E f(X) - E f(U)|`` with a 99% normal interval.

    ``f`` is a truth table over the concatenated input or a callable on the
    (trials x blocks) matrix returning 0/1 values.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    blocks = sample_inputs(spec, adversary, goods, trials, seed)
    if callable(f) and not isinstance(f, BooleanFunction):
        vals = np.asarray(f(blocks), dtype=np.float64)
        if baseline is None:
            raise ValueError("callable functions need an explicit baseline")
    else:
        table = _values(f, spec)
        x = np.zeros(trials, dtype=np.int64)
        for c in range(spec.ell):
            x = (x << spec.n) | blocks[:, c]
        vals = table[x]
        baseline = float(table.mean()) if baseline is None else baseline
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if trials > 1 else 0.0
    hw = Z99 * sd / math.sqrt(trials)
    return MonteCarloEstimate(mean, baseline, abs(mean - baseline), hw, trials)


def make_block_function(fn: Callable[[Sequence[int]], int], ell: int, n: int) -> np.ndarray:
    """Tabulate a function of the block tuple over all inputs."""
    total = ell * n
    if total > MAX_UNIVERSE_BITS:
        raise BudgetExceeded("block function too large to tabulate")
    return np.array([fn(split_blocks(x, ell, n)) for x in range(1 << total)], dtype=np.int64)
