"""Boolean functions on ``{0,1}^l``: Fourier spectra and influence measures.

Coordinate ``i`` (1-based) of an input is bit ``l - i`` of its integer
index, so ``x_1`` is the most significant bit.  Fourier characters use the
same encoding for subsets: ``chi_S(x) = (-1)^{popcount(S & x)}``.  Spectra
are taken of the +-1 valued function ``e(f) = 1 - 2 f``.

Most computations accept a batch of truth tables (one per row) so that
exhaustive sweeps over small arities stay vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import popcount

MAX_ARITY = 24


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    a = np.array(values, dtype=np.float64, copy=True)
    size = a.shape[-1]
    lead = a.shape[:-1]
    h = 1
    while h < size:
        a = a.reshape(*lead, -1, 2, h)
        lo = a[..., 0, :].copy()
        hi = a[..., 1, :]
        a[..., 0, :] = lo + hi
        a[..., 1, :] = lo - hi
        a = a.reshape(*lead, size)
        h *= 2
    return a


def _split(tables: np.ndarray, ell: int, i: int) -> np.ndarray:
    """View tables as (batch, prefix, x_i, suffix)."""
    return tables.reshape(tables.shape[0], 1 << (i - 1), 2, 1 << (ell - i))


def _as_batch(tables) -> tuple[np.ndarray, int]:
    t = np.atleast_2d(np.asarray(tables, dtype=np.float64))
    ell = t.shape[1].bit_length() - 1
    if 1 << ell != t.shape[1]:
        raise ValueError("truth table length must be a power of two")
    return t, ell


def spectrum_batch(tables) -> np.ndarray:
    """Fourier coefficients of ``1 - 2 f`` for each row."""
    t, ell = _as_batch(tables)
    return fwht(1.0 - 2.0 * t) / (1 << ell)


def influences_batch(tables) -> np.ndarray:
    """``I_i = E |f(x, 1, y) - f(x, 0, y)|`` for every coordinate."""
    t, ell = _as_batch(tables)
    out = np.empty((t.shape[0], ell))
    for i in range(1, ell + 1):
        v = _split(t, ell, i)
        out[:, i - 1] = np.abs(v[:, :, 1, :] - v[:, :, 0, :]).mean(axis=(1, 2))
    return out


def online_influences_batch(tables) -> np.ndarray:
    """``oI_i = E_x |E_y f(x, 1, y) - E_y f(x, 0, y)|`` for every coordinate."""
    t, ell = _as_batch(tables)
    out = np.empty((t.shape[0], ell))
    for i in range(1, ell + 1):
        v = _split(t, ell, i).mean(axis=3)
        out[:, i - 1] = np.abs(v[:, :, 1] - v[:, :, 0]).mean(axis=1)
    return out


def online_influences_fourier_batch(spectra) -> np.ndarray:
    """Online influences recomputed from a spectrum of ``1 - 2 f``.

    For coordinate ``i`` the coefficients of sets ``T`` with ``i in T`` and
    ``T`` inside ``[i]`` are collected and re-summed as a function of the
    prefix; the mean absolute value of that function is ``oI_i``.
    """
    s = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
    ell = s.shape[1].bit_length() - 1
    out = np.empty((s.shape[0], ell))
    for i in range(1, ell + 1):
        pre = np.arange(1 << (i - 1))
        masks = (pre << (ell - i + 1)) | (1 << (ell - i))
        g = s[:, masks]
        h = fwht(g)
        out[:, i - 1] = np.abs(h).mean(axis=1)
    return out


def prefix_weight_batch(spectra, i: int) -> np.ndarray:
    """``sum of fhat(S)^2`` over ``S`` inside ``[i]`` containing ``i``."""
    s = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
    ell = s.shape[1].bit_length() - 1
    pre = np.arange(1 << (i - 1))
    masks = (pre << (ell - i + 1)) | (1 << (ell - i))
    return (s[:, masks] ** 2).sum(axis=1)


@dataclass(frozen=True)
class PoincareReport:
    variance: float
    total_online_influence: float
    upper: float
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


@dataclass(frozen=True, eq=False)
class BooleanFunction:
    """Truth table of ``f: {0,1}^l -> {0,1}``."""

    ell: int
    table: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if not 0 <= self.ell <= MAX_ARITY:
            raise ValueError(f"arity must be in [0, {MAX_ARITY}]")
        t = np.asarray(self.table)
        if t.shape != (1 << self.ell,):
            raise ValueError(f"table must have 2^{self.ell} entries")
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("table entries must be 0 or 1")
        t = t.astype(np.uint8)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __eq__(self, other):
        return (
            isinstance(other, BooleanFunction)
            and self.ell == other.ell
            and bool(np.array_equal(self.table, other.table))
        )

    def __hash__(self):
        return hash((self.ell, self.table.tobytes()))

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def mean(self) -> float:
        return float(self.table.mean())

    def is_balanced(self) -> bool:
        return 2 * int(self.table.sum()) == self.table.size

    def spectrum(self) -> np.ndarray:
        return spectrum_batch(self.table)[0]

    def influence(self, i: int) -> float:
        self._check_coord(i)
        return float(influences_batch(self.table)[0, i - 1])

    def influences(self) -> np.ndarray:
        return influences_batch(self.table)[0]

    def online_influence(self, i: int) -> float:
        self._check_coord(i)
        return float(online_influences_batch(self.table)[0, i - 1])

    def online_influences(self) -> np.ndarray:
        return online_influences_batch(self.table)[0]

    def online_influence_fourier(self, i: int) -> float:
        self._check_coord(i)
        return float(online_influences_fourier_batch(self.spectrum())[0, i - 1])

    def total_influence(self) -> float:
        return float(self.influences().sum())

    def total_online_influence(self) -> float:
        return float(self.online_influences().sum())

    def max_online_influence(self) -> tuple[int, float]:
        """Most online-influential coordinate (lowest index on ties)."""
        oi = self.online_influences()
        top = oi.max()
        i = int(np.flatnonzero(np.isclose(oi, top, rtol=0, atol=1e-12))[0])
        return i + 1, float(oi[i])

    def variance(self) -> float:
        """Variance of ``1 - 2 f``."""
        mu = 1.0 - 2.0 * self.mean()
        return 1.0 - mu * mu

    def poincare_report(self, tol: float = 1e-12) -> PoincareReport:
        var = self.variance()
        total = self.total_online_influence()
        upper = math.sqrt(self.ell * var)
        return PoincareReport(var, total, upper, var <= total + tol, total <= upper + tol)

    def restrict(self, i: int, bit: int) -> "BooleanFunction":
        """Fix coordinate ``i`` and drop it from the input."""
        self._check_coord(i)
        v = self.table.reshape(1 << (i - 1), 2, 1 << (self.ell - i))
        return BooleanFunction(self.ell - 1, v[:, bit, :].reshape(-1), f"{self.name}|x{i}={bit}")

    def to_hex(self) -> str:
        return table_to_hex(self.table)

    @classmethod
    def from_hex(cls, text: str, ell: int | None = None, name: str = "custom") -> "BooleanFunction":
        return cls(*_hex_to_table(text, ell), name=name)

    def to_json(self) -> dict:
        return {"ell": self.ell, "name": self.name, "table_hex": self.to_hex()}

    @classmethod
    def from_json(cls, doc: dict) -> "BooleanFunction":
        return cls.from_hex(doc["table_hex"], doc["ell"], doc.get("name", "custom"))

    def _check_coord(self, i: int) -> None:
        if not 1 <= i <= self.ell:
            raise ValueError(f"coordinate {i} outside [1, {self.ell}]")


def table_to_hex(table) -> str:
    """Bit ``x`` of the table goes to bit ``x % 8`` of byte ``x // 8``."""
    bits = np.asarray(table, dtype=np.uint8)
    return np.packbits(bits, bitorder="little").tobytes().hex()


def _hex_to_table(text: str, ell: int | None) -> tuple[int, np.ndarray]:
    text = text.strip().lower()
    if text.startswith("0x"):
        text = text[2:]
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise ValueError(f"malformed hex truth table {text!r}") from exc
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    if ell is None:
        ell = bits.size.bit_length() - 1
        if bits.size < 8 or 1 << ell != bits.size:
            raise ValueError("cannot infer arity from hex; pass ell")
    if (1 << ell) > bits.size or np.any(bits[1 << ell :]):
        raise ValueError(f"hex does not encode a table of arity {ell}")
    return ell, bits[: 1 << ell]


# ---------------------------------------------------------------------------
# named functions


def _inputs(ell: int) -> np.ndarray:
    return np.arange(1 << ell, dtype=np.int64)


def _coord(x: np.ndarray, ell: int, i: int) -> np.ndarray:
    return (x >> (ell - i)) & 1


def parity(ell: int) -> BooleanFunction:
    return BooleanFunction(ell, popcount(_inputs(ell)) & 1, f"parity{ell}")


def majority(ell: int) -> BooleanFunction:
    if ell % 2 == 0:
        raise ValueError("majority needs an odd number of inputs")
    return BooleanFunction(ell, (2 * popcount(_inputs(ell)) > ell).astype(np.uint8), f"maj{ell}")


def dictator(ell: int, i: int) -> BooleanFunction:
    if not 1 <= i <= ell:
        raise ValueError("dictator coordinate out of range")
    return BooleanFunction(ell, _coord(_inputs(ell), ell, i), f"dict{ell}_{i}")


def constant(ell: int, value: int) -> BooleanFunction:
    return BooleanFunction(ell, np.full(1 << ell, value, dtype=np.uint8), f"const{value}")


def conjunction(ell: int) -> BooleanFunction:
    return BooleanFunction(ell, (_inputs(ell) == (1 << ell) - 1).astype(np.uint8), f"and{ell}")


def disjunction(ell: int) -> BooleanFunction:
    return BooleanFunction(ell, (_inputs(ell) != 0).astype(np.uint8), f"or{ell}")


def address(a: int) -> BooleanFunction:
    """Address function on ``a + 2**a`` bits.

    The first ``a`` bits, read most significant first, name a 0-based
    position among the data bits, whose value is returned.
    """
    if a < 1:
        raise ValueError("address width must be positive")
    ell = a + (1 << a)
    x = _inputs(ell)
    idx = x >> (1 << a)
    data_width = 1 << a
    bit = (x >> (data_width - 1 - idx)) & 1
    return BooleanFunction(ell, bit.astype(np.uint8), f"addr{a}")


def random_function(ell: int, seed: int, balanced: bool = False) -> BooleanFunction:
    rng = np.random.default_rng(seed)
    if balanced:
        t = np.zeros(1 << ell, dtype=np.uint8)
        t[rng.permutation(1 << ell)[: 1 << (ell - 1)]] = 1
    else:
        t = rng.integers(0, 2, size=1 << ell, dtype=np.uint8)
    return BooleanFunction(ell, t, f"random{ell}_{seed}")


def make_named_function(name: str, ell: int | None = None, seed: int = 0, **kw) -> BooleanFunction:
    """Build a function from its short name.

    ``address`` takes the address width through ``a`` (or infers it from
    ``ell = a + 2**a``); ``dictator`` takes the coordinate through ``i``.
    """
    key = name.lower()
    if key in ("address", "addr"):
        a = kw.get("a")
        if a is None:
            if ell is None:
                raise ValueError("address needs a or ell")
            a = next((w for w in range(1, 5) if w + (1 << w) == ell), None)
            if a is None:
                raise ValueError(f"no address function has arity {ell}")
        return address(int(a))
    if ell is None:
        raise ValueError(f"{name} needs ell")
    builders = {
        "parity": lambda: parity(ell),
        "majority": lambda: majority(ell),
        "maj": lambda: majority(ell),
        "dictator": lambda: dictator(ell, int(kw.get("i", 1))),
        "and": lambda: conjunction(ell),
        "or": lambda: disjunction(ell),
        "random": lambda: random_function(ell, seed, bool(kw.get("balanced", False))),
        "zero": lambda: constant(ell, 0),
        "one": lambda: constant(ell, 1),
    }
    if key not in builders:
        raise ValueError(f"unknown function name {name!r}")
    return builders[key]()
