"""Reservation values of the single-agent search problem.

With per-period cost ``k`` and posterior-mean distribution ``G`` available
every period, the agent's value ``u`` solves ``c_G(u) = k``. Full
information gives the McCall payoff, no information gives autarky.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidCostError
from .prior import Prior
from .signals import Signal, c_value

ROOT_TOL = 1e-13


def check_cost(prior: Prior, k: float) -> None:
    if not 0.0 < k < prior.mean:
        raise InvalidCostError(f"search cost {k} outside (0, {prior.mean})")


@dataclass(frozen=True)
class SurplusBounds:
    """Autarky and McCall payoffs for a given search cost."""

    autarky: float
    mccall: float

    @property
    def full_surplus(self) -> float:
        return self.mccall - self.autarky


def reservation_value(signal: Signal, prior: Prior, k: float) -> float:
    """The unique ``u`` in (0, 1) with ``c_G(u) = k``.

    ``c_G`` falls from the prior mean at 0 to 0 at 1 and is strictly
    decreasing wherever it is positive, so [0, 1] always brackets the root.
    """
    check_cost(prior, k)
    if signal.kind == "uninformative":
        return prior.mean - k
    return brentq(lambda u: c_value(signal, prior, u) - k, 0.0, 1.0, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps, maxiter=200)


@lru_cache(maxsize=65536)
def surplus_bounds(prior: Prior, k: float) -> SurplusBounds:
    check_cost(prior, k)
    return SurplusBounds(prior.mean - k, reservation_value(Signal.full_info(), prior, k))


@dataclass
class CompStatReport:
    """Reservation values and full surplus along a grid of costs."""

    ks: list[float]
    reservation: list[float]
    full_surplus: list[float]
    violations: list[str] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations


def compstat_report(prior: Prior, k_grid, signal: Signal, tol: float = 1e-9) -> CompStatReport:
    """Check that ``u_k(G)`` and ``ubar_k - ulow_k`` fall in ``k``.

    A pair is flagged when the later value exceeds the earlier one by ``tol``
    or more, so floating-point noise on a flat stretch is not reported.
    """
    ks = [float(k) for k in k_grid]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("cost grid must be strictly increasing")
    res = [reservation_value(signal, prior, k) for k in ks]
    surplus = [surplus_bounds(prior, k).full_surplus for k in ks]
    report = CompStatReport(ks, res, surplus)
    for j in range(1, len(ks)):
        if res[j] >= res[j - 1] + tol:
            report.violations.append(f"reservation value not decreasing between k={ks[j-1]} and k={ks[j]}")
        if surplus[j] >= surplus[j - 1] + tol:
            report.violations.append(f"full surplus not decreasing between k={ks[j-1]} and k={ks[j]}")
    return report
