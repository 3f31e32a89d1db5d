"""Greedy coalition attacks on Boolean functions against online adversaries.

The greedy attack repeatedly hands the currently most online-influential
coordinate to the adversary, which sets it to whichever bit gives the
larger conditional expectation of the restricted function.  Restricted
functions are kept as truth tables in which captured coordinates become
dummies, so influence computations reuse :mod:`onosf.boolfn`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boolfn import BooleanFunction, online_influences_batch
from .sources import SourceSpec, TableAdversary, exact_expectation

MAX_GREEDY_ARITY = 16
TOL = 1e-12


@dataclass
class CoalitionCertificate:
    """Coalition, its online strategy, and the expectation it forces."""

    f: BooleanFunction
    coalition: list[int]
    strategy: TableAdversary
    alpha: float
    beta: float
    achieved_expectation: float
    gains: list[float] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    variances: list[float] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.coalition)

    @property
    def gamma(self) -> float:
        return step_bound_gamma(self.alpha, self.beta)

    @property
    def size_bound(self) -> float:
        """``gamma * l`` from the stated step bound."""
        return self.gamma * self.f.ell

    @property
    def proven_size_bound(self) -> int:
        """Step count implied by the realised per-step increase ``oI / 2``."""
        if self.beta <= self.alpha:
            return 0
        if self.alpha <= 0.0 or self.beta >= 1.0:
            return self.f.ell
        return math.ceil(2 * self.gamma * self.f.ell - 1e-9)

    def spec(self) -> SourceSpec:
        return SourceSpec(self.f.ell, 1, frozenset(self.coalition))

    def replay(self) -> float:
        """Expectation obtained by running the strategy through the source model."""
        return exact_expectation(self.f, self.spec(), self.strategy)

    def to_json(self) -> dict:
        return {
            "function": self.f.to_json(),
            "alpha": self.alpha,
            "beta": self.beta,
            "coalition": list(self.coalition),
            "achieved_expectation": self.achieved_expectation,
            "gains": list(self.gains),
            "increments": list(self.increments),
            "gamma": self.gamma,
            "size_bound": self.size_bound,
            "strategy": self.strategy.to_json(),
        }


def step_bound_gamma(alpha: float, beta: float) -> float:
    """``(beta - alpha) / (4 alpha (1 - beta))``, infinite when ``beta = 1``."""
    if beta >= 1.0 or alpha <= 0.0:
        return math.inf
    return (beta - alpha) / (4 * alpha * (1 - beta))


def _compose(table: np.ndarray, ell: int, i: int, choice: np.ndarray) -> np.ndarray:
    """Table of ``x -> table(x with x_i := choice[x_<i])``."""
    v = table.reshape(1 << (i - 1), 2, 1 << (ell - i))
    picked = v[np.arange(1 << (i - 1)), choice, :]
    return np.repeat(picked[:, None, :], 2, axis=1).reshape(-1)


def greedy_coalition(f: BooleanFunction, beta: float) -> CoalitionCertificate:
    """Capture coordinates by largest online influence until ``E >= beta``."""
    if f.ell > MAX_GREEDY_ARITY:
        from .core import BudgetExceeded

        raise BudgetExceeded(f"greedy attack is limited to {MAX_GREEDY_ARITY} inputs")
    alpha = f.mean()
    if not beta <= 1.0:
        raise ValueError("beta must be at most 1")
    if beta <= alpha:
        raise ValueError(f"beta={beta} must exceed the mean {alpha}")
    ell = f.ell
    cur = f.table.astype(np.float64)
    tables: dict[int, np.ndarray] = {}
    gains, increments, variances = [], [], []
    expectation = alpha
    while expectation < beta - TOL:
        free = [i for i in range(1, ell + 1) if i not in tables]
        if not free:
            break
        oi = online_influences_batch(cur)[0]
        cand = np.array([oi[i - 1] for i in free])
        pick = free[int(np.flatnonzero(cand >= cand.max() - TOL)[0])]
        gain = float(oi[pick - 1])
        var = 1.0 - (1.0 - 2.0 * expectation) ** 2
        if gain + 1e-9 < var / ell:
            raise AssertionError(f"step gain {gain} below variance bound {var / ell}")
        if gain <= TOL:
            break
        v = cur.reshape(1 << (pick - 1), 2, 1 << (ell - pick)).mean(axis=2)
        choice = (v[:, 1] >= v[:, 0]).astype(np.int64)
        cur = _compose(cur, ell, pick, choice)
        new_e = float(cur.mean())
        tables[pick] = choice
        gains.append(gain)
        increments.append(new_e - expectation)
        variances.append(var)
        expectation = new_e
    cert = CoalitionCertificate(
        f, list(tables), TableAdversary(tables), alpha, beta, expectation, gains, increments, variances
    )
    return cert


def bias_budget_bound(alpha, ell, b):
    """Reachable expectation ``alpha (l + 4 b) / (l + 4 alpha b)`` with ``b`` captured bits.

    Works with floats or :class:`fractions.Fraction` inputs.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 <= b <= ell:
        raise ValueError("b must lie in [0, l]")
    return alpha * (ell + 4 * b) / (ell + 4 * alpha * b)


@dataclass
class ImpossibilityCertificate:
    certificate: CoalitionCertificate
    eps: float
    bias: float
    claimed_size: float

    @property
    def within_claimed_size(self) -> bool:
        return self.certificate.size <= self.claimed_size + 1e-9

    @property
    def holds(self) -> bool:
        return self.bias >= self.eps - 1e-12


def extraction_impossibility(f: BooleanFunction, eps: float) -> ImpossibilityCertificate:
    """Coalition biasing a balanced function by at least ``eps``."""
    if abs(f.mean() - 0.5) > 1e-9:
        raise ValueError("function must be balanced")
    if not 0 < eps < 1 / 3:
        raise ValueError("eps must lie in (0, 1/3)")
    cert = greedy_coalition(f, 0.5 + eps)
    return ImpossibilityCertificate(cert, eps, cert.achieved_expectation - 0.5, 3 * eps * f.ell)
