"""Distributions over bit strings, min-entropy measures and flat sources.

Bit strings are plain Python or numpy integers.  A string of width ``w``
stores its first bit in the most significant position, so prefixes are
obtained by right shifts.  Distributions over ``{0,1}^m`` are numpy arrays
of length ``2**m`` indexed by the integer value of the string.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

DEFAULT_BUDGET = 2_000_000
MAX_UNIVERSE_BITS = 24
PROB_ATOL = 1e-9


class InfeasibleError(ValueError):
    """Parameters are valid but the requested object cannot be produced."""


class BudgetExceeded(InfeasibleError):
    """An exhaustive computation would exceed its enumeration budget."""


class ConfigError(ValueError):
    """A configuration document is malformed or has unknown keys."""


def default_budget() -> int:
    """Enumeration budget, overridable through ``LAB_BUDGET``."""
    raw = os.environ.get("LAB_BUDGET")
    if raw is None or raw.strip() == "":
        return DEFAULT_BUDGET
    try:
        value = int(float(raw))
    except ValueError as exc:
        raise ConfigError(f"LAB_BUDGET must be a number, got {raw!r}") from exc
    if value <= 0:
        raise ConfigError("LAB_BUDGET must be positive")
    return value


# ---------------------------------------------------------------------------
# bit helpers


def concat_blocks(blocks: Sequence[int], width: int) -> int:
    """Concatenate blocks of equal width, first block most significant."""
    out = 0
    for b in blocks:
        out = (out << width) | int(b)
    return out


def concat_varwidth(blocks: Sequence[int], widths: Sequence[int]) -> int:
    out = 0
    for b, w in zip(blocks, widths):
        out = (out << w) | (int(b) & ((1 << w) - 1))
    return out


def split_blocks(x: int, count: int, width: int) -> tuple[int, ...]:
    """Inverse of :func:`concat_blocks`."""
    mask = (1 << width) - 1
    return tuple((x >> ((count - 1 - i) * width)) & mask for i in range(count))


def prefix_bits(x, width: int, length: int):
    """First ``length`` bits of a ``width``-bit string (works on arrays)."""
    if not 0 <= length <= width:
        raise ValueError(f"prefix length {length} outside [0, {width}]")
    return x >> (width - length)


def popcount(x):
    """Bit count for ints or integer numpy arrays."""
    if isinstance(x, np.ndarray):
        return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)
    return int(x).bit_count()


# ---------------------------------------------------------------------------
# distributions


def _as_prob(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    if np.any(arr < -PROB_ATOL) or not math.isclose(arr.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("not a probability vector")
    return np.clip(arr, 0.0, None)


def _universe_bits(size: int) -> int:
    m = size.bit_length() - 1
    if 1 << m != size:
        raise ValueError(f"universe size {size} is not a power of two")
    return m


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over ``{0,1}^m``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_prob(self.probs)
        _universe_bits(arr.size)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def bits(self) -> int:
        return _universe_bits(self.probs.size)

    @classmethod
    def uniform(cls, m: int) -> "Distribution":
        return cls(np.full(1 << m, 1.0 / (1 << m)))

    @classmethod
    def point_mass(cls, m: int, z: int) -> "Distribution":
        p = np.zeros(1 << m)
        p[z] = 1.0
        return cls(p)

    @classmethod
    def flat(cls, m: int, support: Sequence[int]) -> "Distribution":
        support = list(support)
        if not support or len(set(support)) != len(support):
            raise ValueError("flat support must be non-empty and distinct")
        p = np.zeros(1 << m)
        p[support] = 1.0 / len(support)
        return cls(p)

    @classmethod
    def from_counts(cls, counts) -> "Distribution":
        c = np.asarray(counts, dtype=np.float64)
        return cls(c / c.sum())

    def min_entropy(self) -> float:
        return min_entropy(self.probs)

    def smooth_min_entropy(self, eps: float) -> float:
        return smooth_min_entropy(self.probs, eps)

    def distance(self, other: "Distribution") -> float:
        return statistical_distance(self.probs, other.probs)

    def to_json(self) -> dict:
        return {"bits": self.bits, "probs": [fmt17(v) for v in self.probs]}

    @classmethod
    def from_json(cls, doc: dict) -> "Distribution":
        return cls(np.array([float(v) for v in doc["probs"]]))


def statistical_distance(p, q) -> float:
    """Half the L1 distance between two probability vectors."""
    p = _as_prob(p)
    q = _as_prob(q)
    if p.shape != q.shape:
        raise ValueError("distributions live on different universes")
    return 0.5 * float(np.abs(p - q).sum())


def min_entropy(p) -> float:
    p = _as_prob(p)
    return -math.log2(float(p.max()))


def smooth_cap(probs, eps: float) -> np.ndarray:
    """Smallest admissible cap for each row of ``probs``.

    The cap ``t`` is the least value ``>= 2**-m`` with
    ``sum(max(p - t, 0)) <= eps``.  With ``S_j`` the sum of the ``j``
    largest atoms, this equals ``max(2**-m, max_j (S_j - eps) / j)``.
    Rows need not sum to one, which lets callers cap sub-normalised
    envelopes as well.
    """
    arr = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    size = arr.shape[1]
    srt = -np.sort(-arr, axis=1)
    csum = np.cumsum(srt, axis=1)
    j = np.arange(1, size + 1, dtype=np.float64)
    best = ((csum - eps) / j).max(axis=1)
    return np.maximum(best, 1.0 / size)


def smooth_min_entropy(p, eps: float, return_witness: bool = False):
    """epsilon-smooth min-entropy by capping the heaviest atoms.

    Every distribution within distance ``eps`` of ``p`` has max probability
    at least the cap returned by :func:`smooth_cap`, and capping then
    spreading the removed mass over the remaining room attains it.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    p = _as_prob(p)
    t = float(smooth_cap(p, eps)[0])
    h = -math.log2(t)
    if not return_witness:
        return h
    removed = np.clip(p - t, 0.0, None)
    capped = p - removed
    room = np.clip(t - capped, 0.0, None)
    mass = removed.sum()
    if mass > 0:
        capped = capped + room * (mass / room.sum())
    return h, Distribution(capped / capped.sum())


# ---------------------------------------------------------------------------
# flat sources


@dataclass(frozen=True)
class FlatSource:
    """Uniform distribution on a support of size ``2**k`` inside ``{0,1}^n``."""

    n: int
    support: tuple[int, ...]

    @property
    def k(self) -> float:
        return math.log2(len(self.support))

    def distribution(self) -> Distribution:
        return Distribution.flat(self.n, self.support)


def flat_source_count(n: int, k: int) -> int:
    _check_flat_params(n, k)
    return math.comb(1 << n, 1 << k)


def _check_flat_params(n: int, k: int) -> None:
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if n > MAX_UNIVERSE_BITS:
        raise BudgetExceeded(f"universe 2^{n} above the 2^{MAX_UNIVERSE_BITS} cap")


def enumerate_flat_sources(n: int, k: int, budget: int | None = None) -> Iterator[FlatSource]:
    """Yield every flat ``k``-source on ``{0,1}^n`` in lexicographic order."""
    from itertools import combinations

    budget = default_budget() if budget is None else budget
    count = flat_source_count(n, k)
    if count > budget:
        raise BudgetExceeded(f"{count} flat sources exceed budget {budget}")
    for supp in combinations(range(1 << n), 1 << k):
        yield FlatSource(n, supp)


def _combination_array(size: int, r: int) -> np.ndarray:
    """All ``r``-subsets of ``range(size)`` as rows, lexicographic order."""
    memo: dict[tuple[int, int], np.ndarray] = {}

    def build(lo: int, r: int) -> np.ndarray:
        # subsets of range(lo, size)
        key = (lo, r)
        if key in memo:
            return memo[key]
        if r == 0:
            out = np.zeros((1, 0), dtype=np.int32)
        elif size - lo < r:
            out = np.zeros((0, r), dtype=np.int32)
        else:
            parts = []
            for first in range(lo, size - r + 1):
                tail = build(first + 1, r - 1)
                head = np.full((tail.shape[0], 1), first, dtype=np.int32)
                parts.append(np.hstack([head, tail]))
            out = np.vstack(parts)
        memo[key] = out
        return out

    return build(0, r)


def _combination_masks(size: int, r: int) -> np.ndarray:
    """All ``r``-subsets of ``range(size)`` as uint64 bitmasks (size <= 64)."""
    if size > 64:
        raise ValueError("bitmask form needs a universe of at most 64 points")
    memo: dict[tuple[int, int], np.ndarray] = {}

    def build(s: int, r: int) -> np.ndarray:
        if r == 0:
            return np.zeros(1, dtype=np.uint64)
        if s < r:
            return np.zeros(0, dtype=np.uint64)
        key = (s, r)
        if key not in memo:
            without = build(s - 1, r)
            with_top = build(s - 1, r - 1) | np.uint64(1 << (s - 1))
            memo[key] = np.concatenate([without, with_top])
        return memo[key]

    return build(size, r)


def flat_support_array(n: int, k: int, budget: int | None = None) -> np.ndarray:
    """Supports of all flat ``k``-sources as an integer matrix."""
    budget = default_budget() if budget is None else budget
    count = flat_source_count(n, k)
    if count > budget:
        raise BudgetExceeded(f"{count} flat sources exceed budget {budget}")
    return _combination_array(1 << n, 1 << k)


def flat_support_masks(n: int, k: int, budget: int | None = None) -> np.ndarray:
    """Supports of all flat ``k``-sources as bitmasks over ``{0,1}^n``."""
    budget = default_budget() if budget is None else budget
    count = flat_source_count(n, k)
    if count > budget:
        raise BudgetExceeded(f"{count} flat sources exceed budget {budget}")
    return _combination_masks(1 << n, 1 << k)


# ---------------------------------------------------------------------------
# serialisation


def fmt17(x: float) -> str:
    """Round-trip safe decimal string."""
    return format(float(x), ".17g")


def fmt12(x) -> str:
    """Table cell formatting with 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(float(x), ".12g")
    return str(x)
