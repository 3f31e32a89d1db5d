"""Seeded extractors, seeded condensers and two-source extractors.

Every object carries its full output table, so verification is exact:
worst cases over ``k``-sources are attained at flat sources, which are
enumerated within a budget.  Explicit constructions (Toeplitz hashing,
field multiplication) sit behind the same interface as randomly searched
tables.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2n
from .core import (
    BudgetExceeded,
    ConfigError,
    InfeasibleError,
    MAX_UNIVERSE_BITS,
    default_budget,
    flat_source_count,
    flat_support_array,
    flat_support_masks,
    min_entropy,
    smooth_cap,
)

CHUNK_CELLS = 1 << 22


def _table_id(table: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(table, dtype=np.int64).tobytes()).hexdigest()[:16]


def _check_table(table: np.ndarray, rows: int, cols: int, m: int) -> np.ndarray:
    t = np.asarray(table, dtype=np.int64)
    if t.shape != (1 << rows, 1 << cols):
        raise ValueError(f"table must have shape (2^{rows}, 2^{cols})")
    if t.size and (t.min() < 0 or t.max() >= 1 << m):
        raise ValueError(f"table values must fit in {m} bits")
    t.setflags(write=False)
    return t


@dataclass(frozen=True, eq=False)
class SeededExtractor:
    """``Ext: {0,1}^n x {0,1}^d -> {0,1}^m`` with its full table."""

    n: int
    d: int
    m: int
    table: np.ndarray
    kind: str = "table"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n + self.d > MAX_UNIVERSE_BITS:
            raise BudgetExceeded("object too large to tabulate")
        object.__setattr__(self, "table", _check_table(self.table, self.n, self.d, self.m))

    def eval(self, x: int, s: int) -> int:
        return int(self.table[x, s])

    @property
    def object_id(self) -> str:
        return f"{self.kind}:{_table_id(self.table)}"

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "widths": {"n": self.n, "d": self.d, "m": self.m}, "params": self.params}
        if self.kind in ("table", "searched"):
            doc["table"] = self.table.tolist()
        return doc


class SeededCondenser(SeededExtractor):
    """Same shape as a seeded extractor; judged by output smooth min-entropy."""


@dataclass(frozen=True, eq=False)
class TwoSourceExtractor:
    """``2Ext: {0,1}^n1 x {0,1}^n2 -> {0,1}^m`` with its full table."""

    n1: int
    n2: int
    m: int
    table: np.ndarray
    kind: str = "table"
    params: dict = field(default_factory=dict)
    strong: str | None = None

    def __post_init__(self):
        if self.n1 + self.n2 > MAX_UNIVERSE_BITS:
            raise BudgetExceeded("object too large to tabulate")
        object.__setattr__(self, "table", _check_table(self.table, self.n1, self.n2, self.m))

    def eval(self, x: int, y: int) -> int:
        return int(self.table[x, y])

    @property
    def object_id(self) -> str:
        return f"{self.kind}:{_table_id(self.table)}"

    def to_json(self) -> dict:
        doc = {
            "kind": self.kind,
            "widths": {"n1": self.n1, "n2": self.n2, "m": self.m},
            "params": self.params,
            "strong": self.strong,
        }
        if self.kind in ("table", "searched"):
            doc["table"] = self.table.tolist()
        return doc


def object_from_json(doc: dict):
    """Rebuild an object from :meth:`to_json` output."""
    kind = doc["kind"]
    w = doc["widths"]
    if kind == "lhl_toeplitz":
        return lhl_extractor(w["n"], w["m"])
    if kind == "inner_product":
        return inner_product_2ext(w["n1"], w["m"])
    if kind == "poly_eval":
        return asymmetric_2ext(doc["params"]["d"], w["n2"], w["m"])
    table = np.asarray(doc["table"], dtype=np.int64)
    if "n1" in w:
        return TwoSourceExtractor(w["n1"], w["n2"], w["m"], table, kind, doc.get("params", {}), doc.get("strong"))
    cls = SeededCondenser if doc.get("params", {}).get("role") == "condenser" else SeededExtractor
    return cls(w["n"], w["d"], w["m"], table, kind, doc.get("params", {}))


# ---------------------------------------------------------------------------
# explicit constructions


def _reverse_bits(x: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros_like(x)
    for b in range(width):
        out |= ((x >> b) & 1) << (width - 1 - b)
    return out


def toeplitz_eval(x, s, n: int, m: int):
    """``T_s x`` over GF(2) for a Toeplitz matrix given by an ``(n+m-1)``-bit seed.

    Seed bit ``t`` (0 = most significant) sits on the diagonal ``i - j = t - n + 1``,
    so row ``i`` reads seed bits ``i .. i+n-1`` against ``x`` reversed.
    """
    d = n + m - 1
    x = np.asarray(x, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    rx = _reverse_bits(x, n)
    out = np.zeros(np.broadcast(x, s).shape, dtype=np.int64)
    mask = (1 << n) - 1
    for i in range(m):
        window = (s >> (d - i - n)) & mask
        bit = np.bitwise_count((window & rx).astype(np.uint64)).astype(np.int64) & 1
        out = (out << 1) | bit
    return out


def toeplitz_eval_naive(x: int, s: int, n: int, m: int) -> int:
    """Bit-by-bit matrix-vector product, used as an independent oracle."""
    d = n + m - 1
    seed = [(s >> (d - 1 - t)) & 1 for t in range(d)]
    xb = [(x >> (n - 1 - j)) & 1 for j in range(n)]
    out = 0
    for i in range(m):
        acc = 0
        for j in range(n):
            acc ^= seed[i - j + n - 1] & xb[j]
        out = (out << 1) | acc
    return out


def lhl_extractor(n: int, m: int) -> SeededExtractor:
    """Toeplitz hashing; strong with error ``2^((m-k)/2 - 1)`` on ``k``-sources."""
    if not 0 < m <= n:
        raise ValueError("need 0 < m <= n")
    d = n + m - 1
    if n + d > MAX_UNIVERSE_BITS:
        raise BudgetExceeded("Toeplitz table too large")
    x = np.arange(1 << n, dtype=np.int64)[:, None]
    s = np.arange(1 << d, dtype=np.int64)[None, :]
    return SeededExtractor(n, d, m, toeplitz_eval(x, s, n, m), "lhl_toeplitz", {})


def lhl_error_bound(k: float, m: int) -> float:
    return 2.0 ** ((m - k) / 2 - 1)


def inner_product_2ext(n: int, m: int) -> TwoSourceExtractor:
    """Low ``m`` bits of the product ``x * y`` in GF(2^n)."""
    if not 0 < m <= n:
        raise ValueError("need 0 < m <= n")
    x = np.arange(1 << n, dtype=np.uint64)[:, None]
    y = np.arange(1 << n, dtype=np.uint64)[None, :]
    prod = gf2n.gf_mul_array(x, y, n).astype(np.int64)
    return TwoSourceExtractor(n, n, m, prod & ((1 << m) - 1), "inner_product", {"n": n})


def asymmetric_2ext(d: int, n: int, m: int) -> TwoSourceExtractor:
    """Low ``m`` bits of ``sum_i x_i * y^i`` with ``x`` cut into ``d`` field elements."""
    if d < 1 or not 0 < m <= n:
        raise ValueError("need d >= 1 and 0 < m <= n")
    xs = np.arange(1 << (d * n), dtype=np.int64)
    y = np.arange(1 << n, dtype=np.uint64)
    acc = np.zeros((xs.size, y.size), dtype=np.uint64)
    power = np.ones_like(y)
    mask = (1 << n) - 1
    for i in range(1, d + 1):
        power = gf2n.gf_mul_array(power, y, n)
        chunk = ((xs >> ((d - i) * n)) & mask).astype(np.uint64)
        acc ^= gf2n.gf_mul_array(chunk[:, None], power[None, :], n)
    table = acc.astype(np.int64) & ((1 << m) - 1)
    return TwoSourceExtractor(d * n, n, m, table, "poly_eval", {"d": d, "n": n})


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    object_id: str
    property: str
    params: dict
    measured: float
    passed: bool
    witness: list = field(default_factory=list)
    sources_checked: int = 0

    def to_json(self) -> dict:
        return {
            "object_id": self.object_id,
            "property": self.property,
            "params": self.params,
            "measured": self.measured,
            "passed": self.passed,
            "witness": self.witness,
            "sources_checked": self.sources_checked,
        }


def _flat_counts(table: np.ndarray, n: int, k: int, budget: int | None):
    """Yield ``(supports, counts)`` chunks where ``counts[c, col, z]`` counts
    rows of support ``c`` mapping to ``z`` in column ``col``."""
    rows, cols = table.shape
    outs = int(table.max()) + 1 if table.size else 1
    outs = max(outs, 1)
    total = flat_source_count(n, k)
    budget = default_budget() if budget is None else budget
    if total > budget:
        raise BudgetExceeded(f"{total} flat sources exceed budget {budget}")
    per = max(1, CHUNK_CELLS // max(1, cols * outs))
    if rows <= 64:
        masks = flat_support_masks(n, k, budget)
        weights = (np.uint64(1) << np.arange(rows, dtype=np.uint64))
        col_masks = np.zeros((cols, outs), dtype=np.uint64)
        for z in range(outs):
            col_masks[:, z] = ((table == z).astype(np.uint64) * weights[:, None]).sum(axis=0, dtype=np.uint64)
        for lo in range(0, masks.size, per):
            chunk = masks[lo : lo + per]
            counts = np.bitwise_count(chunk[:, None, None] & col_masks[None, :, :]).astype(np.int64)
            yield chunk, counts
    else:
        supports = flat_support_array(n, k, budget)
        for lo in range(0, supports.shape[0], per):
            chunk = supports[lo : lo + per]
            vals = table[chunk]  # (c, K, cols)
            c = chunk.shape[0]
            idx = (np.arange(c)[:, None, None] * cols + np.arange(cols)[None, None, :]) * outs + vals
            counts = np.bincount(idx.reshape(-1), minlength=c * cols * outs).reshape(c, cols, outs)
            yield chunk, counts


def _support_list(chunk_row, n: int) -> list[int]:
    if np.ndim(chunk_row) == 0:
        v = int(chunk_row)
        return [i for i in range(1 << n) if v >> i & 1]
    return [int(v) for v in chunk_row]


def _tv_rows(counts: np.ndarray, total: float, m: int) -> np.ndarray:
    """Distance from uniform of count vectors along the last axis."""
    size = 1 << m
    p = counts / total
    if p.shape[-1] < size:
        pad = [(0, 0)] * (p.ndim - 1) + [(0, size - p.shape[-1])]
        p = np.pad(p, pad)
    return 0.5 * np.abs(p - 1.0 / size).sum(axis=-1)


def verify_seeded_extractor(ext: SeededExtractor, k: int, strong: bool = False, budget: int | None = None) -> VerificationReport:
    """Worst distance from uniform over all flat ``k``-sources."""
    K = 1 << k
    worst, witness, checked = -1.0, None, 0
    for chunk, counts in _flat_counts(ext.table, ext.n, k, budget):
        if strong:
            err = _tv_rows(counts, K, ext.m).mean(axis=1)
        else:
            err = _tv_rows(counts.sum(axis=1), K << ext.d, ext.m)
        i = int(np.argmax(err))
        if err[i] > worst + 1e-15:
            worst, witness = float(err[i]), _support_list(chunk[i], ext.n)
        checked += len(chunk)
    return VerificationReport(
        ext.object_id, "strong_extractor" if strong else "extractor",
        {"k": k, "n": ext.n, "d": ext.d, "m": ext.m}, max(worst, 0.0), True, [witness], checked,
    )


def verify_seeded_condenser(
    cond: SeededExtractor, k_in: int, k_out: float, eps: float, budget: int | None = None
) -> VerificationReport:
    """Least ``eps``-smooth min-entropy of the output over all flat ``k_in``-sources."""
    worst, witness, checked = math.inf, None, 0
    total = (1 << k_in) << cond.d
    size = 1 << cond.m
    for chunk, counts in _flat_counts(cond.table, cond.n, k_in, budget):
        dist = counts.sum(axis=1) / total
        if dist.shape[1] < size:
            dist = np.pad(dist, [(0, 0), (0, size - dist.shape[1])])
        h = -np.log2(smooth_cap(dist, eps))
        i = int(np.argmin(h))
        if h[i] < worst - 1e-15:
            worst, witness = float(h[i]), _support_list(chunk[i], cond.n)
        checked += len(chunk)
    return VerificationReport(
        cond.object_id, "condenser",
        {"k_in": k_in, "k_out": k_out, "eps": eps, "n": cond.n, "d": cond.d, "m": cond.m},
        worst, worst >= k_out - 1e-9, [witness], checked,
    )


def _test_sets(m: int) -> np.ndarray:
    """Membership matrix of every non-trivial subset of ``{0,1}^m``."""
    if m > 3:
        raise BudgetExceeded("two-source verification enumerates test sets; m <= 3")
    sets = np.arange(1, (1 << (1 << m)) - 1)
    return ((sets[:, None] >> np.arange(1 << m)[None, :]) & 1).astype(np.float64)


def verify_two_source_extractor(
    ext: TwoSourceExtractor, k1: int, k2: int, strong: str | None = None, budget: int | None = None
) -> VerificationReport:
    """Worst error over all pairs of flat sources.

    One argument is enumerated; the worst flat source on the other side is
    found exactly by taking the ``2**k`` best points, per test set when the
    error is not strong, or per point when it is strong in the enumerated
    argument.
    """
    if strong not in (None, "x", "y"):
        raise ValueError("strong must be None, 'x' or 'y'")
    table = ext.table
    n_enum, k_enum, k_other, tab = ext.n1, k1, k2, table
    swap = strong == "x"
    if strong is None:
        # the non-strong error is symmetric, so enumerate the cheaper side
        swap = flat_source_count(ext.n2, k2) < flat_source_count(ext.n1, k1)
    if swap:
        n_enum, k_enum, k_other, tab = ext.n2, k2, k1, table.T
    K_enum, K_other = 1 << k_enum, 1 << k_other
    if K_other > tab.shape[1]:
        raise ValueError("source entropy above its width")
    worst, witness, checked = -1.0, None, 0
    if ext.m == 0:
        return VerificationReport(ext.object_id, "two_source", {"k1": k1, "k2": k2}, 0.0, True, [], 0)
    membership = None if strong else _test_sets(ext.m)
    for chunk, counts in _flat_counts(tab, n_enum, k_enum, budget):
        # counts: (c, other, z) rows of the enumerated source hitting z at each other-point
        p = counts / K_enum
        if p.shape[2] < 1 << ext.m:
            p = np.pad(p, [(0, 0), (0, 0), (0, (1 << ext.m) - p.shape[2])])
        if strong:
            per_point = _tv_rows(p, 1.0, ext.m)  # (c, other)
            top = -np.sort(-per_point, axis=1)[:, :K_other]
            err = top.mean(axis=1)
            picks = np.argsort(-per_point, axis=1, kind="stable")[:, :K_other]
        else:
            mass = p @ membership.T  # (c, other, T)
            top = -np.sort(-mass, axis=1)[:, :K_other, :]
            adv = top.mean(axis=1) - membership.sum(axis=1)[None, :] / (1 << ext.m)
            best_t = np.argmax(adv, axis=1)
            err = adv[np.arange(adv.shape[0]), best_t]
            picks = None
        i = int(np.argmax(err))
        if err[i] > worst + 1e-15:
            worst = float(err[i])
            if strong:
                other = sorted(int(v) for v in picks[i])
            else:
                col = mass[i, :, best_t[i]]
                other = sorted(int(v) for v in np.argsort(-col, kind="stable")[:K_other])
            enum_support = _support_list(chunk[i], n_enum)
            witness = [other, enum_support] if swap else [enum_support, other]
        checked += len(chunk)
    return VerificationReport(
        ext.object_id, "two_source" if strong is None else f"two_source_strong_{strong}",
        {"k1": k1, "k2": k2, "n1": ext.n1, "n2": ext.n2, "m": ext.m}, max(worst, 0.0), True, witness, checked,
    )


def two_source_error_naive(ext: TwoSourceExtractor, k1: int, k2: int) -> float:
    """Double loop over all flat pairs; an oracle for tiny widths."""
    worst = 0.0
    xs = list(itertools.combinations(range(1 << ext.n1), 1 << k1))
    ys = list(itertools.combinations(range(1 << ext.n2), 1 << k2))
    size = 1 << ext.m
    for sx in xs:
        sub = ext.table[list(sx)]
        for sy in ys:
            vals = sub[:, list(sy)].reshape(-1)
            p = np.bincount(vals, minlength=size) / vals.size
            worst = max(worst, 0.5 * float(np.abs(p - 1.0 / size).sum()))
    return worst


def seeded_error_naive(ext: SeededExtractor, k: int, strong: bool) -> float:
    worst = 0.0
    size = 1 << ext.m
    for sx in itertools.combinations(range(1 << ext.n), 1 << k):
        sub = ext.table[list(sx)]
        if strong:
            errs = []
            for s in range(1 << ext.d):
                p = np.bincount(sub[:, s], minlength=size) / len(sx)
                errs.append(0.5 * float(np.abs(p - 1.0 / size).sum()))
            err = sum(errs) / len(errs)
        else:
            p = np.bincount(sub.reshape(-1), minlength=size) / sub.size
            err = 0.5 * float(np.abs(p - 1.0 / size).sum())
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# search


class SearchFailed(InfeasibleError):
    def __init__(self, message: str, report: VerificationReport | None):
        super().__init__(message)
        self.report = report


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


_SEARCH_KEYS = {
    "seeded_ext": (("n", "d", "m"), ("k",)),
    "seeded_cond": (("n", "d"), ("k_in", "k_out")),
    "two_source_ext": (("n1", "n2", "m"), ("k1", "k2")),
}


def search_object(
    kind: str,
    params: dict,
    kparams: dict,
    eps: float,
    rng_seed: int = 0,
    tries: int = 2000,
    budget: int | None = None,
):
    """Sample random tables until one passes exact verification.

    ``seeded_ext``: params ``n, d, m``, kparams ``k`` (and ``strong``).
    ``seeded_cond``: params ``n, d`` and optionally ``m``, kparams ``k_in, k_out``;
    without ``m`` the output length grows from ``ceil(k_out)`` until a table passes.
    ``two_source_ext``: params ``n1, n2, m``, kparams ``k1, k2`` (and ``strong``).
    Returns ``(object, report)`` or raises :class:`SearchFailed`.
    """
    if tries < 1:
        raise ValueError("tries must be positive")
    need = _SEARCH_KEYS.get(kind)
    if need is None:
        raise ConfigError(f"unknown object kind {kind!r}")
    missing = [k for k in need[0] if k not in params] + [k for k in need[1] if k not in kparams]
    if missing:
        raise ConfigError(f"{kind} search needs {', '.join(missing)}")
    if kind == "seeded_cond" and params.get("m") is None:
        n, d = params["n"], params["d"]
        best = None
        for m in range(max(1, math.ceil(kparams["k_out"] - 1e-9)), n + d + 1):
            try:
                return search_object(kind, {**params, "m": m}, kparams, eps, rng_seed, tries, budget)
            except SearchFailed as exc:
                best = exc.report
        raise SearchFailed("no output length admits a passing condenser", best)
    best_rep, best_score = None, None
    for trial in range(tries):
        rng = _trial_rng(rng_seed, trial)
        if kind == "seeded_ext":
            n, d, m = params["n"], params["d"], params["m"]
            obj = SeededExtractor(n, d, m, rng.integers(0, 1 << m, size=(1 << n, 1 << d)), "searched",
                                  {"seed": rng_seed, "trial": trial})
            rep = verify_seeded_extractor(obj, kparams["k"], bool(kparams.get("strong", False)), budget)
            rep.passed = rep.measured <= eps + 1e-12
            score = -rep.measured
        elif kind == "seeded_cond":
            n, d, m = params["n"], params["d"], params["m"]
            obj = SeededCondenser(n, d, m, rng.integers(0, 1 << m, size=(1 << n, 1 << d)), "searched",
                                  {"seed": rng_seed, "trial": trial, "role": "condenser"})
            rep = verify_seeded_condenser(obj, kparams["k_in"], kparams["k_out"], eps, budget)
            score = rep.measured
        elif kind == "two_source_ext":
            n1, n2, m = params["n1"], params["n2"], params["m"]
            strong = kparams.get("strong")
            obj = TwoSourceExtractor(n1, n2, m, rng.integers(0, 1 << m, size=(1 << n1, 1 << n2)), "searched",
                                     {"seed": rng_seed, "trial": trial}, strong)
            rep = verify_two_source_extractor(obj, kparams["k1"], kparams["k2"], strong, budget)
            rep.passed = rep.measured <= eps + 1e-12
            score = -rep.measured
        else:
            raise ValueError(f"unknown object kind {kind!r}")
        rep.params = {**rep.params, "eps": eps, "trial": trial}
        if rep.passed:
            return obj, rep
        if best_score is None or score > best_score:
            best_rep, best_score = rep, score
    raise SearchFailed(f"no passing {kind} in {tries} tries", best_rep)


# ---------------------------------------------------------------------------
# entropy bookkeeping


def average_conditional_min_entropy(joint, given: tuple[int, ...]) -> float:
    """``-log2 E_b max_a Pr[A = a | B = b]`` for a joint probability array.

    ``given`` lists the axes forming the conditioning variable; the rest
    form the target.
    """
    p = np.asarray(joint, dtype=np.float64)
    target = tuple(a for a in range(p.ndim) if a not in given)
    if not target:
        return 0.0
    guess = p.max(axis=target) if target else p
    return -math.log2(float(np.sum(guess)))


def chain_rule_fraction(joint, eps: float) -> tuple[float, float]:
    """Mass of ``y`` meeting the min-entropy chain-rule threshold, and the threshold.

    ``joint[x, y]``; the threshold is ``H(X) - log|supp Y| - log(1/eps)``.
    """
    p = np.asarray(joint, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    supp = int(np.count_nonzero(py > 0))
    threshold = min_entropy(px) - math.log2(supp) - math.log2(1.0 / eps)
    mass = 0.0
    for y in np.flatnonzero(py > 0):
        cond = p[:, y] / py[y]
        if -math.log2(cond.max()) >= threshold - 1e-12:
            mass += py[y]
    return mass, threshold


def average_case_lift(k1: float, eps: float, eta: float) -> tuple[float, float, bool]:
    """Parameters of the average-case version of a two-source extractor.

    Returns ``(k1 + log2(1/eta), eps + eta, vacuous)`` where ``vacuous``
    flags an error of at least one.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    e = eps + eta
    return k1 + math.log2(1.0 / eta), e, e >= 1.0


# ---------------------------------------------------------------------------
# few adversarial bits


@dataclass
class FewBitsResult:
    b: int
    positions: tuple[int, ...]
    base_entropy: float
    eps: float
    measured: float
    exact: bool
    vacuous: bool

    @property
    def holds(self) -> bool:
        return self.vacuous or self.measured >= self.base_entropy - self.b - 1e-9


def control_few_bits(
    outputs: np.ndarray,
    support: np.ndarray,
    width: int,
    m: int,
    eps: float,
    b: int,
    budget: int = 200_000,
) -> list[FewBitsResult]:
    """Check every way to overwrite ``b`` input bits by functions of the rest.

    ``outputs[x]`` is the condenser output on the ``width``-bit input ``x``
    and ``support`` is a flat input distribution.  For each set of ``b``
    controlled positions the adversary keeps the projection on the other
    positions and picks one support point in each fibre.  All picks are
    enumerated when their number is within ``budget``; otherwise the
    pointwise envelope over picks certifies a lower bound.
    """
    support = np.asarray(support, dtype=np.int64)
    size = 1 << m
    base = np.bincount(outputs[support], minlength=size) / support.size
    h0 = -math.log2(float(smooth_cap(base, eps)[0]))
    eps_b = eps * (1 << b)
    results = []
    for pos in itertools.combinations(range(width), b):
        keep = ((1 << width) - 1) ^ sum(1 << (width - 1 - p) for p in pos)
        proj = support & keep
        fibres = [support[proj == u] for u in np.unique(proj)]
        weights = np.array([f.size for f in fibres], dtype=np.float64) / support.size
        if eps_b >= 1.0:
            results.append(FewBitsResult(b, pos, h0, eps, math.inf, True, True))
            continue
        n_choices = math.prod(f.size for f in fibres)
        if n_choices <= budget:
            worst = math.inf
            outs = [outputs[f] for f in fibres]
            for pick in itertools.product(*outs):
                dist = np.bincount(np.asarray(pick), weights=weights, minlength=size)
                worst = min(worst, -math.log2(float(smooth_cap(dist, eps_b)[0])))
            results.append(FewBitsResult(b, pos, h0, eps, worst, True, False))
        else:
            env = np.zeros(size)
            for f, w in zip(fibres, weights):
                env[np.unique(outputs[f])] += w
            h = -math.log2(float(smooth_cap(env, eps_b)[0]))
            results.append(FewBitsResult(b, pos, h0, eps, h, False, False))
    return results
