"""Contract layer: pass-fail thresholds, on-path offers, willingness to pay,
and the market-structure thresholds derived from them.

Notation used in docstrings: ``ubar`` is the McCall payoff, ``ulow`` the
autarky payoff, ``m0`` the prior mean and ``|y|`` the total of a payoff
profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, InfeasibleProfileError, RootNotBracketedError
from .prior import Prior
from .search_core import check_cost, surplus_bounds
from .signals import Signal, c_value

FEAS_TOL = 1e-10


@dataclass(frozen=True)
class PayoffProfile:
    """Broker payoffs followed by the agent payoff."""

    broker_payoffs: tuple
    agent_payoff: float

    def __post_init__(self):
        object.__setattr__(self, "broker_payoffs", tuple(float(v) for v in self.broker_payoffs))
        object.__setattr__(self, "agent_payoff", float(self.agent_payoff))
        if not self.broker_payoffs:
            raise ValueError("a payoff profile needs at least one broker")

    @property
    def n(self) -> int:
        return len(self.broker_payoffs)

    @property
    def broker_sum(self) -> float:
        return math.fsum(self.broker_payoffs)

    def total(self) -> float:
        return math.fsum(self.broker_payoffs) + self.agent_payoff

    def as_array(self) -> np.ndarray:
        return np.array(self.broker_payoffs + (self.agent_payoff,))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> PayoffProfile:
        values = [float(v) for v in values]
        return cls(tuple(values[:-1]), values[-1])

    def to_dict(self) -> dict:
        return {"brokers": list(self.broker_payoffs), "agent": self.agent_payoff}

    @classmethod
    def from_dict(cls, spec: dict) -> PayoffProfile:
        if set(spec) != {"brokers", "agent"}:
            raise ValueError(f"payoff profile needs keys 'brokers' and 'agent', got {sorted(spec)}")
        return cls(tuple(spec["brokers"]), spec["agent"])

    def __str__(self) -> str:
        brokers = ", ".join(f"{v:.6g}" for v in self.broker_payoffs)
        return f"({brokers}; {self.agent_payoff:.6g})"


@dataclass(frozen=True)
class Offer:
    """A take-it-or-leave-it (price, signal) pair."""

    price: float
    signal: Signal

    def __post_init__(self):
        if not self.price >= 0.0:
            raise ValueError(f"offer price must be nonnegative, got {self.price}")

    @classmethod
    def null(cls) -> Offer:
        return cls(0.0, Signal.uninformative())

    def to_dict(self) -> dict:
        return {"price": self.price, "signal": self.signal.to_dict()}


def is_feasible(prior: Prior, k: float, y: PayoffProfile, tol: float = FEAS_TOL) -> bool:
    sb = surplus_bounds(prior, k)
    return (
        min(y.broker_payoffs) >= -tol
        and y.agent_payoff >= sb.autarky - tol
        and y.total() <= sb.mccall + tol
    )


def require_feasible(prior: Prior, k: float, y: PayoffProfile, tol: float = FEAS_TOL) -> None:
    if not is_feasible(prior, k, y, tol):
        sb = surplus_bounds(prior, k)
        raise InfeasibleProfileError(
            f"profile {y} infeasible at k={k}: need brokers >= 0, agent >= {sb.autarky:.6g}, total <= {sb.mccall:.6g}"
        )


# -- pass-fail thresholds ---------------------------------------------------


def threshold_gap(prior: Prior, x, u):
    """L(x, u) = c_F(x) + (1 - F(x)) (x - u)."""
    return prior.c_full(x) + (1.0 - prior._cdf(x)) * (np.asarray(x) - u)


@lru_cache(maxsize=200_000)
def threshold_x(prior: Prior, k: float, u: float) -> float:
    """Pass threshold x in [ubar, 1) whose pass-fail signal yields the agent ``u``.

    Solves ``c_F(x) + (1 - F(x)) (x - u) = k``. The left side equals
    ``k + (1 - F(ubar))(ubar - u) >= k`` at ``x = ubar`` and 0 at ``x = 1``.
    """
    sb = surplus_bounds(prior, k)
    if not sb.autarky - FEAS_TOL <= u <= sb.mccall + FEAS_TOL:
        raise DomainError(f"u={u} outside [{sb.autarky}, {sb.mccall}]")
    u = min(max(u, sb.autarky), sb.mccall)
    lo = sb.mccall
    f_lo = float(threshold_gap(prior, lo, u)) - k
    if f_lo <= 0.0:
        return lo
    return brentq(lambda x: float(threshold_gap(prior, x, u)) - k, lo, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def onpath_signal(prior: Prior, k: float, y: PayoffProfile) -> Signal:
    return Signal.pass_fail(threshold_x(prior, k, y.total()))


def price_direct(prior: Prior, k: float, y: PayoffProfile) -> float:
    """On-path price ``c_{G^x}(y_agent) - c_{G^x}(|y|)``."""
    require_feasible(prior, k, y)
    sig = onpath_signal(prior, k, y)
    return max(0.0, c_value(sig, prior, y.agent_payoff) - c_value(sig, prior, y.total()))


def price_closed_form(prior: Prior, k: float, y: PayoffProfile) -> float:
    """On-path price ``(1 - F(x)) * sum of broker payoffs``."""
    require_feasible(prior, k, y)
    x = threshold_x(prior, k, y.total())
    return (1.0 - float(prior._cdf(x))) * max(0.0, y.broker_sum)


def onpath_offer(prior: Prior, k: float, y: PayoffProfile) -> Offer:
    """The offer every broker posts to implement ``y`` stationarily.

    The signal passes goods above ``x_k(|y|)``; the price extracts the
    brokers' share of the continuation value.
    """
    return Offer(price_direct(prior, k, y), onpath_signal(prior, k, y))


def wtp(prior: Prior, k: float, y: PayoffProfile, deviation_signal: Signal) -> float:
    """Largest price the agent accepts for ``deviation_signal`` when on-path
    play would implement ``y``, given that accepting a deviation triggers
    autarky and rejecting it triggers the Bertrand profile.
    """
    require_feasible(prior, k, y)
    sb = surplus_bounds(prior, k)
    sig = onpath_signal(prior, k, y)
    onpath_value = c_value(sig, prior, sb.mccall) - price_direct(prior, k, y)
    null_value = max(prior.mean - sb.mccall, 0.0)
    gross = sb.autarky - sb.mccall + c_value(deviation_signal, prior, sb.autarky) - max(onpath_value, null_value)
    return max(gross, 0.0)


def phi(prior: Prior, k: float) -> float:
    """Phi(k) = c_F(ulow) + ulow - ((m0 - ubar)^+ + ubar).

    Positive exactly when a free full-information offer, accepted under
    autarky continuation, beats rejecting everything under the Bertrand
    continuation.
    """
    check_cost(prior, k)
    sb = surplus_bounds(prior, k)
    return prior.c_full(sb.autarky) + sb.autarky - (max(prior.mean - sb.mccall, 0.0) + sb.mccall)


def epsilon_k(prior: Prior, k: float) -> float:
    """c_{G^x}(ubar) with x = x_k(ulow): the smallest on-path continuation
    value an agent can hold at the McCall threshold."""
    sb = surplus_bounds(prior, k)
    x = threshold_x(prior, k, sb.autarky)
    return c_value(Signal.pass_fail(x), prior, sb.mccall)


# -- thresholds ---------------------------------------------------------------


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12, maxiter: int = 200) -> tuple[float, float]:
    """Bisection that keeps the sign-change bracket; returns (midpoint, width)."""
    lo, hi = float(lo), float(hi)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo, 0.0
    if f_hi == 0.0:
        return hi, 0.0
    if np.sign(f_lo) == np.sign(f_hi):
        raise RootNotBracketedError(f"no sign change on [{lo}, {hi}]: f={f_lo:.3g}, {f_hi:.3g}")
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid, 0.0
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi), hi - lo


@dataclass(frozen=True)
class Thresholds:
    """Market-structure thresholds of a prior.

    Attributes:
        k_star: cost at which Phi changes sign.
        capital_k: cost at which the McCall payoff equals the prior mean.
        epsilon: lower bound on epsilon_k over costs above k_star.
        k_double_star: first cost above k_star where Phi(k) exceeds
            epsilon * F(ubar_k), or capital_k if none.
        bracket_width: widest final bisection bracket among the roots.
        later_crossings: approximate locations of further sign changes of
            Phi(k) - epsilon * F(ubar_k) beyond k_double_star, if any.
    """

    k_star: float
    capital_k: float
    epsilon: float
    k_double_star: float
    bracket_width: float
    later_crossings: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "K": self.capital_k,
            "epsilon": self.epsilon,
            "k_double_star": self.k_double_star,
            "bracket_width": self.bracket_width,
            "later_crossings": list(self.later_crossings),
        }

    @classmethod
    def from_dict(cls, spec: dict) -> Thresholds:
        return cls(
            spec["k_star"], spec["K"], spec["epsilon"], spec["k_double_star"],
            spec["bracket_width"], tuple(spec.get("later_crossings", ())),
        )


def _sign_changes(values: np.ndarray) -> np.ndarray:
    s = np.sign(values)
    return np.nonzero(s[:-1] * s[1:] < 0)[0]


@lru_cache(maxsize=64)
def compute_thresholds(prior: Prior, grid_size: int = 2000, tol: float = 1e-12) -> Thresholds:
    """Compute K, k*, epsilon and k** for ``prior``.

    Raises:
        RootNotBracketedError: when Phi, the McCall-minus-mean gap or the
            collar condition lacks the sign pattern these thresholds assume.
    """
    m0 = prior.mean
    k_lo, k_hi = m0 * 1e-9, m0 * (1.0 - 1e-9)

    def mccall_gap(k):
        return surplus_bounds(prior, k).mccall - m0

    capital_k, w_cap = bisect(mccall_gap, k_lo, k_hi, tol)

    phi_grid_k = np.linspace(k_lo, capital_k, grid_size)
    phi_vals = np.array([phi(prior, k) for k in phi_grid_k])
    changes = _sign_changes(phi_vals)
    if len(changes) != 1:
        raise RootNotBracketedError(f"Phi has {len(changes)} sign changes on (0, K); expected exactly one")
    j = changes[0]
    k_star, w_star = bisect(lambda k: phi(prior, k), phi_grid_k[j], phi_grid_k[j + 1], tol)

    eps_grid = k_star + (m0 - k_star) * np.linspace(0.0, 1.0, grid_size + 1)[1:-1]
    eps_grid = np.concatenate([[k_star + 1e-9], eps_grid])
    eps_vals = np.array([epsilon_k(prior, k) for k in eps_grid])
    j = int(np.argmin(eps_vals))
    epsilon = float(eps_vals[j])
    if 0 < j < len(eps_grid) - 1:
        refined = minimize_scalar(
            lambda k: epsilon_k(prior, k),
            bracket=(eps_grid[j - 1], eps_grid[j], eps_grid[j + 1]),
            method="golden",
            tol=1e-10,
        )
        epsilon = min(epsilon, float(refined.fun))
    if not epsilon > 0.0:
        raise RootNotBracketedError(f"collar width {epsilon} is not positive")

    def collar_gap(k):
        sb = surplus_bounds(prior, k)
        return phi(prior, k) - epsilon * float(prior._cdf(sb.mccall))

    g_grid = np.linspace(k_star, capital_k, grid_size + 1)[1:]
    g_vals = np.array([collar_gap(k) for k in g_grid])
    positive = np.nonzero(g_vals > 0.0)[0]
    widths = [w_cap, w_star]
    later: list[float] = []
    if len(positive) == 0:
        k_double_star = capital_k
    else:
        j = int(positive[0])
        lo = g_grid[j - 1] if j > 0 else k_star
        k_double_star, w = bisect(collar_gap, lo, g_grid[j], tol)
        widths.append(w)
        later = [float(g_grid[i + 1]) for i in _sign_changes(g_vals) if i + 1 > j]
    return Thresholds(k_star, capital_k, epsilon, k_double_star, float(max(widths)), tuple(later))
