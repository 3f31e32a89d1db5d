"""Arithmetic in GF(2^n) with a fixed low-weight modulus per degree.

The modulus for degree ``n`` is the irreducible trinomial
``x^n + x^k + 1`` with the smallest ``k``; when none exists, the
pentanomial ``x^n + x^a + x^b + x^c + 1`` with ``a > b > c`` minimised
lexicographically in ``(a, b, c)``.  Irreducibility is checked with
Rabin's test, so the table is derived rather than typed in.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_DEGREE = 64


def clmul(a: int, b: int) -> int:
    """Carry-less product of two polynomials over GF(2)."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, mod: int) -> int:
    deg = mod.bit_length() - 1
    while a.bit_length() - 1 >= deg:
        a ^= mod << (a.bit_length() - 1 - deg)
    return a


def _mulmod(a: int, b: int, mod: int) -> int:
    return poly_mod(clmul(a, b), mod)


def _powmod_x2k(k: int, mod: int) -> int:
    """``x^(2^k) mod mod`` by repeated squaring."""
    r = 2  # the polynomial x
    for _ in range(k):
        r = _mulmod(r, r, mod)
    return r


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(mod: int) -> bool:
    """Rabin's irreducibility test for a polynomial over GF(2)."""
    n = mod.bit_length() - 1
    if n < 1:
        return False
    if _powmod_x2k(n, mod) != poly_mod(2, mod):
        return False
    for p in _prime_factors(n):
        h = _powmod_x2k(n // p, mod) ^ 2
        if poly_gcd(mod, h) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def modulus(n: int) -> int:
    """Fixed irreducible polynomial of degree ``n`` (bit ``i`` = coefficient of x^i)."""
    if not 1 <= n <= MAX_DEGREE:
        raise ValueError(f"field degree must be in [1, {MAX_DEGREE}]")
    if n == 1:
        return 0b11
    top = 1 << n
    for k in range(1, n):
        cand = top | (1 << k) | 1
        if is_irreducible(cand):
            return cand
    for a in range(3, n):
        for b in range(2, a):
            for c in range(1, b):
                cand = top | (1 << a) | (1 << b) | (1 << c) | 1
                if is_irreducible(cand):
                    return cand
    raise RuntimeError(f"no low-weight irreducible polynomial of degree {n}")


def gf_mul(a: int, b: int, n: int) -> int:
    """Product in GF(2^n), reducing after each shift."""
    mod = modulus(n)
    top = 1 << n
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= mod
    return out


def gf_mul_reference(a: int, b: int, n: int) -> int:
    """Full carry-less product followed by long division."""
    return poly_mod(clmul(a, b), modulus(n))


def gf_pow(a: int, e: int, n: int) -> int:
    out = 1
    while e:
        if e & 1:
            out = gf_mul(out, a, n)
        a = gf_mul(a, a, n)
        e >>= 1
    return out


def gf_inv(a: int, n: int) -> int:
    if a == 0:
        raise ZeroDivisionError("zero has no inverse")
    return gf_pow(a, (1 << n) - 2, n)


def gf_mul_array(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Vectorised product for ``n <= 62``."""
    if n > 62:
        raise ValueError("vectorised product needs n <= 62")
    mod = np.uint64(modulus(n))
    top = np.uint64(1 << n)
    a = np.asarray(a, dtype=np.uint64).copy()
    b = np.asarray(b, dtype=np.uint64).copy()
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    out = np.zeros_like(a)
    one = np.uint64(1)
    for _ in range(n):
        out ^= np.where(b & one, a, np.uint64(0))
        b >>= one
        a <<= one
        a ^= np.where(a & top, mod, np.uint64(0))
    return out
