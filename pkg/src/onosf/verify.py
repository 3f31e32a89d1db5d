"""Invariant suite behind ``verify-all``.

Each check runs a property on exact small instances and reports whether it
held.  ``small`` sizes finish in seconds; ``full`` sizes match the test
suite's acceptance runs more closely.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attacks import extraction_impossibility, greedy_coalition, step_bound_gamma
from .boolfn import (
    BooleanFunction,
    address,
    online_influences_batch,
    online_influences_fourier_batch,
    prefix_weight_batch,
    random_function,
    spectrum_batch,
)
from .prims import average_conditional_min_entropy, chain_rule_fraction
from .protocols import (
    FixedLeader,
    address_extractor_errors,
    composition_checks,
    estimate_leader_quality,
    two_stage_leader_election,
)
from .sources import SourceSpec, brute_force_bias, optimal_online_bias

TOL = 1e-9

SIZES = {
    "small": {"poincare_ell": 3, "random": 50, "random_ell": 8, "greedy": 5, "joints": 100, "trials": 2000},
    "full": {"poincare_ell": 4, "random": 1000, "random_ell": 10, "greedy": 100, "joints": 1000, "trials": 100_000},
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def all_tables(ell: int) -> np.ndarray:
    """Every truth table of arity ``ell`` as rows of a 0/1 matrix."""
    x = np.arange(1 << (1 << ell), dtype=np.int64)
    return ((x[:, None] >> np.arange(1 << ell)[None, :]) & 1).astype(np.uint8)


def random_tables(count: int, ell: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=(count, 1 << ell), dtype=np.uint8)


def poincare_violations(tables: np.ndarray) -> int:
    t = np.asarray(tables, dtype=np.float64)
    ell = t.shape[1].bit_length() - 1
    mu = 1 - 2 * t.mean(axis=1)
    var = 1 - mu * mu
    total = online_influences_batch(t).sum(axis=1)
    bad = (var > total + TOL) | (total > np.sqrt(ell * var) + TOL)
    return int(bad.sum())


def sandwich_violations(tables: np.ndarray) -> int:
    t = np.asarray(tables, dtype=np.float64)
    ell = t.shape[1].bit_length() - 1
    oi = online_influences_batch(t)
    spec = spectrum_batch(t)
    bad = 0
    for i in range(1, ell + 1):
        w = prefix_weight_batch(spec, i)
        bad += int(((oi[:, i - 1] ** 2 > w + TOL) | (w > oi[:, i - 1] + TOL)).sum())
    return bad


def fourier_gap(tables: np.ndarray) -> float:
    t = np.asarray(tables, dtype=np.float64)
    return float(np.abs(online_influences_batch(t) - online_influences_fourier_batch(spectrum_batch(t))).max())


def address_values_ok(a: int) -> tuple[bool, str]:
    f = address(a)
    oi, inf = f.online_influences(), f.influences()
    data = 1.0 / (1 << a)
    ok = (np.allclose(oi[:a], 0, atol=TOL) and np.allclose(oi[a:], data, atol=TOL)
          and np.allclose(inf[a:], data, atol=TOL) and bool(np.all(inf[:a] > 0)))
    return ok, f"a={a} oI_data={oi[a]:.6g} I_addr={inf[0]:.6g}"


def dp_matches_brute_force(max_ell: int = 3) -> tuple[int, int]:
    """Count of (f, coalition) pairs checked and mismatches."""
    checked = mismatched = 0
    for ell in range(1, max_ell + 1):
        coalitions = [frozenset(c) for r in range(3) for c in itertools.combinations(range(1, ell + 1), r)]
        for row in all_tables(ell):
            f = BooleanFunction(ell, row)
            for bad in coalitions:
                spec = SourceSpec(ell, 1, bad)
                rep = optimal_online_bias(f, spec)
                hi, lo = brute_force_bias(f, spec)
                checked += 1
                if abs(rep.max_e - hi) > 1e-12 or abs(rep.min_e - lo) > 1e-12:
                    mismatched += 1
    return checked, mismatched


def greedy_ok(count: int, ell: int = 12, beta: float = 0.6, seed0: int = 0) -> tuple[int, int]:
    failures = 0
    for s in range(count):
        f = random_function(ell, seed0 + s, balanced=True)
        cert = greedy_coalition(f, beta)
        bound = ell * step_bound_gamma(cert.alpha, beta)
        replay = cert.replay()
        if cert.size > bound + 1e-9 or cert.achieved_expectation < beta - 1e-12 or abs(replay - cert.achieved_expectation) > TOL:
            failures += 1
    return count, failures


def impossibility_ok(ell: int = 4, eps: float = 0.1) -> tuple[int, int]:
    checked = failures = 0
    limit = math.ceil(3 * eps * ell)
    for row in all_tables(ell):
        if 2 * int(row.sum()) != row.size:
            continue
        cert = extraction_impossibility(BooleanFunction(ell, row), eps)
        checked += 1
        if cert.certificate.size > limit or not cert.holds:
            failures += 1
    return checked, failures


def random_joint(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Random joint distribution, sparse in some draws so supports vary."""
    p = rng.random(shape) ** rng.integers(1, 6)
    p[rng.random(shape) < rng.random() * 0.6] = 0
    if p.sum() == 0:
        p.flat[0] = 1.0
    return p / p.sum()


def chain_rule_failures(count: int, seed: int = 0) -> tuple[int, int]:
    """Failures of the worst-case and the average-case chain rule."""
    rng = np.random.default_rng(seed)
    worst = avg = 0
    for _ in range(count):
        sx, sy = int(rng.integers(2, 9)), int(rng.integers(1, 9))
        p = random_joint(rng, (sx, sy))
        eps = float(rng.uniform(0.01, 0.9))
        mass, _ = chain_rule_fraction(p, eps)
        if mass < 1 - eps - TOL:
            worst += 1
        q = random_joint(rng, (int(rng.integers(2, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 5))))
        lam = math.log2(int(np.count_nonzero(q.sum(axis=(0, 2)) > 0)))
        h_a_bc = average_conditional_min_entropy(q, (1, 2))
        h_ab_c = average_conditional_min_entropy(q, (2,))
        h_a_c = average_conditional_min_entropy(q.sum(axis=1), (1,))
        if h_a_bc < h_ab_c - lam - TOL or h_ab_c - lam < h_a_c - lam - TOL:
            avg += 1
    return worst, avg


def run_suite(size: str = "small", only: Callable[[str], bool] | None = None) -> list[CheckResult]:
    if size not in SIZES:
        raise ValueError(f"unknown suite size {size!r}")
    z = SIZES[size]
    checks: list[tuple[str, Callable[[], tuple[bool, str]]]] = []

    def add(name):
        def deco(fn):
            checks.append((name, fn))
            return fn

        return deco

    @add("poincare")
    def _():
        ell = z["poincare_ell"]
        v = poincare_violations(all_tables(ell)) + poincare_violations(random_tables(z["random"], z["random_ell"], 1))
        return v == 0, f"violations={v}"

    @add("fourier_agreement")
    def _():
        gap = fourier_gap(random_tables(z["random"], z["random_ell"], 2))
        return gap <= TOL, f"max_gap={gap:.3g}"

    @add("address_values")
    def _():
        res = [address_values_ok(a) for a in (1, 2, 3)]
        return all(r[0] for r in res), "; ".join(r[1] for r in res)

    @add("sandwich")
    def _():
        v = sandwich_violations(all_tables(z["poincare_ell"])) + sandwich_violations(random_tables(z["random"], z["random_ell"], 3))
        return v == 0, f"violations={v}"

    @add("bias_dp_vs_brute_force")
    def _():
        checked, bad = dp_matches_brute_force(2 if size == "small" else 3)
        return bad == 0, f"checked={checked} mismatched={bad}"

    @add("greedy_attack")
    def _():
        count, bad = greedy_ok(z["greedy"])
        return bad == 0, f"functions={count} failures={bad}"

    @add("extraction_impossibility")
    def _():
        checked, bad = impossibility_ok()
        return bad == 0, f"functions={checked} failures={bad}"

    @add("address_extractor")
    def _():
        worst = {ell: max(address_extractor_errors(ell).values()) for ell in (3, 4, 5)}
        ok = all(w <= 1 / (ell - 1) + 1e-12 for ell, w in worst.items())
        return ok, " ".join(f"ell={k}:{v:.6g}" for k, v in worst.items())

    @add("chain_rules")
    def _():
        w, a = chain_rule_failures(z["joints"])
        return w == 0 and a == 0, f"worst_case_failures={w} average_case_failures={a}"

    @add("extractor_from_protocol")
    def _():
        bad = total = 0
        for ell in (2, 3):
            for proto in (FixedLeader(ell), two_stage_leader_election(ell, threshold=ell),
                          two_stage_leader_election(ell, threshold=1, final_stage="first")):
                cs = composition_checks(proto, 2)
                total += len(cs)
                bad += sum(not c.passed for c in cs)
        return bad == 0, f"instances={total} failures={bad}"

    @add("lightest_bin_survivors")
    def _():
        spec = two_stage_leader_election(1024, threshold=32)
        st = estimate_leader_quality(spec, "crowd", 0.1, z["trials"], 7)
        frac = st.checks["survivor_stated"]
        return frac >= 0.99, f"fraction={frac:.6g}"

    out = []
    for name, fn in checks:
        if only is not None and not only(name):
            continue
        t0 = time.perf_counter()
        ok, detail = fn()
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
