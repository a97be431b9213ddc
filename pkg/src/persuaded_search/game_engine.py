"""Strategy automata for the repeated search market, their analytic payoffs,
Monte Carlo simulation and deviation checks.

An automaton is a payoff profile currently being implemented. Every period
each broker posts the on-path offer of that profile. A broker deviation that
the agent accepts moves play to the punishment profile, a rejected one to the
reward profile; agent deviations are ignored.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .contracts import (
    Offer,
    PayoffProfile,
    onpath_offer,
    require_feasible,
    threshold_x,
)
from .equilibrium_sets import Membership, membership
from .errors import CapExceededError
from .prior import Prior
from .search_core import surplus_bounds
from .signals import FULL_INFO, Signal, atoms, c_value, pass_fail_cells, realize, signal_cdf

VALUE_TOL = 1e-12
DEFAULT_CAP = 1_000_000


class Mode(str, enum.Enum):
    COMPETITIVE = "competitive"
    MONOPOLY_TRIANGLE = "monopoly_triangle"


@dataclass(frozen=True)
class StrategyAutomaton:
    """Stationary play of ``current_state`` with deviation-triggered switches.

    Attributes:
        target: the profile the automaton is built to support.
        mode: ``COMPETITIVE`` punishes with autarky and rewards with the
            Bertrand profile; ``MONOPOLY_TRIANGLE`` (one broker) punishes with
            (nu, ulow) and rewards with (nu, ubar - nu).
        nu: broker payoff floor used by the monopoly triangle.
        current_state: profile implemented this period (defaults to target).
        null_onpath: brokers post the null offer on path. Only meaningful
            for the autarky profile, which it implements in one period.
    """

    target: PayoffProfile
    mode: Mode = Mode.COMPETITIVE
    nu: float = 0.0
    current_state: Optional[PayoffProfile] = None
    null_onpath: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.current_state is None:
            object.__setattr__(self, "current_state", self.target)
        if self.mode == Mode.MONOPOLY_TRIANGLE and self.target.n != 1:
            raise ValueError("the monopoly triangle automaton needs exactly one broker")

    @property
    def n(self) -> int:
        return self.target.n

    def punish(self, prior: Prior, k: float) -> PayoffProfile:
        sb = surplus_bounds(prior, k)
        if self.mode == Mode.COMPETITIVE:
            return PayoffProfile((0.0,) * self.n, sb.autarky)
        return PayoffProfile((self.nu,), sb.autarky)

    def reward(self, prior: Prior, k: float) -> PayoffProfile:
        sb = surplus_bounds(prior, k)
        if self.mode == Mode.COMPETITIVE:
            return PayoffProfile((0.0,) * self.n, sb.mccall)
        return PayoffProfile((self.nu,), sb.mccall - self.nu)

    def states(self, prior: Prior, k: float) -> dict[str, PayoffProfile]:
        return {"target": self.target, "punish": self.punish(prior, k), "reward": self.reward(prior, k)}

    def at(self, state: PayoffProfile) -> StrategyAutomaton:
        return replace(self, current_state=state, null_onpath=False)


def state_offer(prior: Prior, k: float, automaton: StrategyAutomaton, state: PayoffProfile) -> Offer:
    if automaton.null_onpath and state == automaton.current_state:
        return Offer.null()
    return onpath_offer(prior, k, state)


# -- agent side -------------------------------------------------------------------


def search_value(signal: Signal, prior: Prior, continuation: float, price: float) -> float:
    """Agent's value of buying (price, signal) before paying the search cost:
    ``c_G(u) + u - p`` with ``u`` the continuation payoff."""
    return c_value(signal, prior, continuation) + continuation - price


def threshold_policy_value(signal: Signal, prior: Prior, continuation: float, price: float, threshold: float) -> float:
    """Value of stopping iff the posterior mean exceeds ``threshold`` while the
    continuation pays ``continuation``."""
    if signal.kind == FULL_INFO:
        tail = (prior.mean - prior.partial_expectation(min(max(threshold, 0.0), 1.0))) - continuation * (1.0 - float(prior._cdf(threshold)))
    else:
        probs, means = atoms(signal, prior)
        tail = float(np.sum(probs * (means - continuation) * (means > threshold)))
    return continuation + tail - price


@dataclass(frozen=True)
class BestResponse:
    """Purchase and stopping choice of the agent.

    Attributes:
        choice: index of the broker bought from, or ``None`` for the null offer.
        maximizers: all options attaining the best value (``None`` = null).
        values: value of each broker option followed by the null option.
        stop_threshold: stop iff the realized posterior mean exceeds this.
    """

    choice: Optional[int]
    maximizers: tuple
    values: tuple
    stop_threshold: float


def best_response(
    offers: Sequence[Offer],
    continuations: Callable[[Optional[int]], PayoffProfile],
    prior: Prior,
    k: float,
    deviator: Optional[int] = None,
) -> BestResponse:
    """Sequentially rational purchase and stopping rule.

    ``continuations(w)`` gives the continuation profile after buying from
    broker ``w`` (``None`` for the null offer). Among tied options the agent
    avoids ``deviator``, prefers brokers in index order, then the null offer.
    """
    options: list[tuple[Optional[int], Offer]] = list(enumerate(offers)) + [(None, Offer.null())]
    values = [search_value(o.signal, prior, continuations(w).agent_payoff, o.price) for w, o in options]
    best = max(values)
    maxim = tuple(w for (w, _), v in zip(options, values) if v >= best - VALUE_TOL)
    order = [w for w in maxim if w is not None and w != deviator]
    if None in maxim:
        order.append(None)
    if deviator in maxim:
        order.append(deviator)
    choice = order[0]
    return BestResponse(choice, maxim, tuple(values), continuations(choice).agent_payoff)


# -- analytic payoffs -------------------------------------------------------------


def analytic_payoffs(prior: Prior, k: float, y: PayoffProfile) -> PayoffProfile:
    """Expected payoffs of stationary on-path play of ``y``.

    Play stops at the first pass, which has probability ``q = 1 - F(x)`` per
    period, so each period's price and cost are paid ``1/q`` times on average.
    """
    require_feasible(prior, k, y)
    x = threshold_x(prior, k, y.total())
    q = 1.0 - float(prior._cdf(x))
    price = onpath_offer(prior, k, y).price
    agent = prior.cond_mean_above(x) - (price + k) / q
    s = y.broker_sum
    shares = [v / s for v in y.broker_payoffs] if s > 0 else [1.0 / y.n] * y.n
    return PayoffProfile(tuple(price / q * w for w in shares), agent)


def expected_duration(prior: Prior, k: float, y: PayoffProfile) -> float:
    x = threshold_x(prior, k, y.total())
    return 1.0 / (1.0 - float(prior._cdf(x)))


# -- deviation search -------------------------------------------------------------


@dataclass(frozen=True)
class DeviationResult:
    """Supremum of a broker's payoff over one-shot deviations.

    The accepted-offer value is a supremum: at ``offer.price`` itself the
    agent is indifferent and rejects.
    """

    payoff: float
    offer: Offer
    accepted: bool
    grid_payoff: float


def _reject_option_values(prior, k, automaton, state, deviator):
    """Values and continue-probabilities of the agent's non-deviation options."""
    reward = automaton.reward(prior, k)
    ra = reward.agent_payoff
    onpath = state_offer(prior, k, automaton, state)
    opts = []
    for j in range(automaton.n):
        if j != deviator:
            opts.append((j, search_value(onpath.signal, prior, ra, onpath.price), signal_cdf(onpath.signal, prior, ra)))
    null = Signal.uninformative()
    opts.append((None, search_value(null, prior, ra, 0.0), signal_cdf(null, prior, ra)))
    return opts


def broker_deviation_search(
    automaton: StrategyAutomaton,
    deviator: int,
    prior: Prior,
    k: float,
    price_grid: Optional[Sequence[float]] = None,
    x_grid: Optional[Sequence[float]] = None,
) -> DeviationResult:
    """Best one-shot deviation of ``deviator`` from the current state.

    Signals range over pass-fail thresholds in ``x_grid`` plus full
    information. For each signal the best accepted price is found in closed
    form; ``price_grid`` additionally scores explicit prices as a cross-check.
    """
    state = automaton.current_state
    punish = automaton.punish(prior, k)
    reward = automaton.reward(prior, k)
    pa, pi = punish.agent_payoff, punish.broker_payoffs[deviator]
    ri = reward.broker_payoffs[deviator]
    if x_grid is None:
        x_grid = np.linspace(0.0, 1.0, 401)[1:-1]
    xs = np.asarray(x_grid, dtype=float)

    opts = _reject_option_values(prior, k, automaton, state, deviator)
    reject_value = max(v for _, v, _ in opts)
    # the agent rejects into the best alternative; ties go to brokers first
    _, _, cont_prob = next(o for o in opts if o[1] >= reject_value - VALUE_TOL)
    reject_payoff = cont_prob * ri

    fx, low, high = pass_fail_cells(prior, xs)
    c_pf = fx * np.maximum(low - pa, 0.0) + (1.0 - fx) * np.maximum(high - pa, 0.0)
    g_pf = fx * (low <= pa) + (1.0 - fx) * (high <= pa)
    # full information first so that it wins ties with pass-fail signals
    c_all = np.concatenate([[prior.c_full(pa)], c_pf])
    g_all = np.concatenate([[float(prior._cdf(pa))], g_pf])
    pbar = c_all + pa - reject_value
    accept_sup = np.where(pbar > 0.0, pbar + g_all * pi, -np.inf)
    j = int(np.argmax(accept_sup))
    sig = Signal.full_info() if j == 0 else Signal.pass_fail(xs[j - 1])

    grid_best = reject_payoff
    if price_grid is not None:
        ps = np.asarray(price_grid, dtype=float)
        acc = (c_all[:, None] + pa - ps[None, :]) > reject_value + VALUE_TOL
        vals = np.where(acc, ps[None, :] + g_all[:, None] * pi, reject_payoff)
        grid_best = float(vals.max())

    if accept_sup[j] > reject_payoff:
        return DeviationResult(float(accept_sup[j]), Offer(float(pbar[j]), sig), True, grid_best)
    # at price max(pbar, 0) the agent is at best indifferent and rejects
    return DeviationResult(reject_payoff, Offer(max(float(pbar[j]), 0.0), sig), False, grid_best)


# -- support verification ---------------------------------------------------------


@dataclass
class SupportReport:
    generated: bool
    broker_ic: bool
    agent_sr: bool
    continuations_in_set: bool
    details: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.generated and self.broker_ic and self.agent_sr and self.continuations_in_set

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "broker_ic": self.broker_ic,
            "agent_sr": self.agent_sr,
            "continuations_in_set": self.continuations_in_set,
            "details": list(self.details),
        }

    @classmethod
    def from_dict(cls, spec: dict) -> SupportReport:
        return cls(spec["generated"], spec["broker_ic"], spec["agent_sr"], spec["continuations_in_set"], list(spec.get("details", [])))


def _agent_sr_check(prior, k, automaton, state, offer_grid, tol, shifts=(-0.05, -0.01, 0.01, 0.05)):
    """Compare the best response with every other purchase and with shifted
    stopping thresholds, on path and after each deviation offer in the grid."""
    punish = automaton.punish(prior, k)
    reward = automaton.reward(prior, k)
    onpath = state_offer(prior, k, automaton, state)
    scenarios = [(None, None)] + [(i, off) for off in offer_grid for i in range(automaton.n)]
    for dev, dev_offer in scenarios:
        offers = [onpath] * automaton.n
        if dev is None:
            def cont(w, _s=state):
                return _s
        else:
            offers[dev] = dev_offer

            def cont(w, _d=dev):
                return punish if w == _d else reward
        br = best_response(offers, cont, prior, k, deviator=dev)
        best = max(br.values)
        options = list(enumerate(offers)) + [(None, Offer.null())]
        for w, off in options:
            u = cont(w).agent_payoff
            for t in (u,) + tuple(u + s for s in shifts):
                alt = threshold_policy_value(off.signal, prior, u, off.price, t)
                if alt > best + tol:
                    return False, f"policy (w={w}, threshold={t:.4g}) beats the best response by {alt - best:.3g}"
        chosen = dict(options)[br.choice]
        own = threshold_policy_value(chosen.signal, prior, br.stop_threshold, chosen.price, br.stop_threshold)
        if abs(own - best) > tol:
            return False, "best-response value inconsistent with its own stopping rule"
    return True, ""


def verify_supported(
    y: PayoffProfile,
    prior: Prior,
    k: float,
    n: int,
    mode: Mode | str = Mode.COMPETITIVE,
    nu: float = 0.0,
    x_grid: Optional[Sequence[float]] = None,
    price_grid: Optional[Sequence[float]] = None,
    tol: float = 1e-8,
    agent_offer_grid: Optional[Sequence[Offer]] = None,
) -> SupportReport:
    """Check the support conditions for ``y`` under the automaton of ``mode``.

    Conditions are checked at every state the automaton can reach (target,
    punishment and reward), since a continuation profile that is not itself
    incentive compatible cannot carry play.
    """
    require_feasible(prior, k, y)
    if y.n != n:
        raise ValueError(f"profile has {y.n} brokers, expected {n}")
    aut = StrategyAutomaton(y, Mode(mode), nu)
    if agent_offer_grid is None:
        sb = surplus_bounds(prior, k)
        agent_offer_grid = [Offer(p, s) for p in (0.0, 0.01, 0.05) for s in (Signal.full_info(), Signal.pass_fail(sb.mccall))]
    report = SupportReport(True, True, True, True)
    for name, state in aut.states(prior, k).items():
        try:
            got = analytic_payoffs(prior, k, state)
        except Exception as exc:  # infeasible states cannot be generated
            report.generated = False
            report.details.append(f"{name}: {exc}")
            continue
        gap = float(np.max(np.abs(got.as_array() - state.as_array())))
        if gap > tol:
            report.generated = False
            report.details.append(f"{name}: analytic payoffs differ from state by {gap:.3g}")
        at = aut.at(state)
        for i in range(n):
            dev = broker_deviation_search(at, i, prior, k, price_grid, x_grid)
            if dev.payoff > state.broker_payoffs[i] + tol:
                report.broker_ic = False
                report.details.append(
                    f"{name}: broker {i + 1} deviates to {dev.offer.signal} at price {dev.offer.price:.6g} for {dev.payoff:.6g} > {state.broker_payoffs[i]:.6g}"
                )
        ok, msg = _agent_sr_check(prior, k, at, state, agent_offer_grid, tol)
        if not ok:
            report.agent_sr = False
            report.details.append(f"{name}: {msg}")
        if membership(prior, k, n, state) == Membership.OUT:
            report.continuations_in_set = False
            report.details.append(f"{name}: state {state} lies outside the equilibrium set bounds")
    return report


# -- simulation -------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, episodes: np.ndarray, period: int, slot: int) -> np.ndarray:
    """Uniform(0, 1) variates addressed by (seed, episode, period, slot).

    Each draw depends only on its address, so an episode replays identically
    whether simulated alone or inside a batch.
    """
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(seed % 2**64) + _GOLDEN)
        z = _mix(z ^ (np.asarray(episodes, dtype=np.uint64) * _GOLDEN))
        z = _mix(z ^ (np.uint64(period) * _M1))
        z = _mix(z ^ (np.uint64(slot) * _M2))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class BrokerDeviation:
    """Broker ``broker`` posts ``offer`` instead of the on-path offer in ``period``."""

    broker: int
    offer: Offer
    period: int


@dataclass
class EpisodeResult:
    stop_period: int
    consumed_quality: float
    agent_total: float
    broker_totals: tuple
    transcript: Optional[list] = None
    flags: tuple = ()


@dataclass
class BatchResult:
    stop_period: np.ndarray
    consumed_quality: np.ndarray
    agent_total: np.ndarray
    broker_totals: np.ndarray
    flags: tuple = ()

    def episode(self, j: int) -> EpisodeResult:
        return EpisodeResult(
            int(self.stop_period[j]), float(self.consumed_quality[j]), float(self.agent_total[j]),
            tuple(float(v) for v in self.broker_totals[j]), None, self.flags,
        )


def _period_plan(prior, k, aut, state, deviations, period):
    """Offers, agent choice set and stopping threshold for one period."""
    onpath = state_offer(prior, k, aut, state)
    offers = [onpath] * aut.n
    devs = sorted(d.broker for d in deviations if d.period == period)
    flags = []
    dev = None
    if devs:
        for d in deviations:
            if d.period == period:
                offers[d.broker] = d.offer
        dev = devs[0]
        if len(devs) > 1:
            flags.append(f"period {period}: simultaneous deviations by brokers {[d + 1 for d in devs]}; lowest index governs")
        punish, reward = aut.punish(prior, k), aut.reward(prior, k)

        def cont(w):
            return punish if w == dev else reward
    else:
        def cont(w):
            return state
    br = best_response(offers, cont, prior, k, deviator=dev)
    return offers, br, cont, dev, flags


def _run(automaton, prior, k, seed, episodes, cap, deviations, shift, record):
    episodes = np.asarray(episodes, dtype=np.int64)
    size = len(episodes)
    n = automaton.n
    stop_period = np.zeros(size, dtype=np.int64)
    quality = np.zeros(size)
    agent_paid = np.zeros(size)
    broker_tot = np.zeros((size, n))
    active = np.arange(size)
    state = automaton.current_state
    deviations = tuple(deviations or ())
    flags: list[str] = []
    transcript: list = [] if record else None
    period = 0
    while active.size:
        period += 1
        if period > cap:
            raise CapExceededError(f"{active.size} episodes still searching after {cap} periods")
        offers, br, cont, dev, fl = _period_plan(prior, k, automaton, state, deviations, period)
        flags.extend(fl)
        ids = episodes[active]
        theta = prior.ppf(counter_uniforms(seed, ids, period, 0))
        # the agent randomizes among tied brokers in proportion to their payoffs
        brokers = [w for w in br.maximizers if w is not None and w != dev]
        if brokers and (dev is None or br.choice != dev):
            weights = np.array([state.broker_payoffs[w] for w in brokers]) if dev is None else np.zeros(len(brokers))
            weights = weights / weights.sum() if weights.sum() > 0 else np.full(len(brokers), 1.0 / len(brokers))
            draw = counter_uniforms(seed, ids, period, 1)
            idx = np.minimum(np.searchsorted(np.cumsum(weights), draw, side="right"), len(brokers) - 1)
            choice = np.asarray(brokers)[idx]
        else:
            choice = np.full(active.size, -1 if br.choice is None else br.choice)
        prices = np.array([o.price for o in offers] + [0.0])
        paid = prices[choice]  # index -1 picks the null price
        agent_paid[active] += paid + k
        for w in range(n):
            broker_tot[active[choice == w], w] += prices[w]
        signals = [o.signal for o in offers] + [Signal.uninformative()]
        m = np.empty(active.size)
        for w in np.unique(choice):
            sel = choice == w
            m[sel] = realize(signals[w], prior, theta[sel])
        thresholds = np.array([cont(w).agent_payoff for w in range(n)] + [cont(None).agent_payoff])
        stop = m > thresholds[choice] + shift
        done = active[stop]
        stop_period[done] = period
        quality[done] = theta[stop]
        if record:
            w0 = int(choice[0])
            transcript.append({
                "period": period,
                "offers": [o.to_dict() for o in offers],
                "purchase": None if w0 == -1 else w0 + 1,
                "price": float(paid[0]),
                "theta": float(theta[0]),
                "realization": float(m[0]),
                "decision": "stop" if bool(stop[0]) else "continue",
            })
        if dev is not None:
            # play is deterministic across episodes given the period, so the
            # state path is shared; the deviator's branch is read off the
            # agent's deterministic choice
            state = cont(int(choice[0]) if choice[0] >= 0 else None)
        active = active[~stop]
    agent_total = quality - agent_paid
    return BatchResult(stop_period, quality, agent_total, broker_tot, tuple(flags)), transcript


def simulate_batch(
    automaton: StrategyAutomaton,
    prior: Prior,
    k: float,
    trials: int,
    seed: int,
    cap: int = DEFAULT_CAP,
    deviations: Sequence[BrokerDeviation] = (),
    agent_threshold_shift: float = 0.0,
) -> BatchResult:
    """Simulate episodes ``0 .. trials-1`` under ``seed``."""
    return _run(automaton, prior, k, seed, np.arange(trials), cap, deviations, agent_threshold_shift, False)[0]


def simulate_episode(
    automaton: StrategyAutomaton,
    prior: Prior,
    k: float,
    rng_seed: int,
    episode: int = 0,
    cap: int = DEFAULT_CAP,
    deviations: Sequence[BrokerDeviation] = (),
    agent_threshold_shift: float = 0.0,
    trace: bool = False,
) -> EpisodeResult:
    batch, transcript = _run(automaton, prior, k, rng_seed, np.array([episode]), cap, deviations, agent_threshold_shift, trace)
    result = batch.episode(0)
    result.transcript = transcript
    return result


@dataclass(frozen=True)
class MCEstimate:
    """Sample means and standard errors of broker payoffs, agent payoff and
    episode length."""

    components: tuple
    means: tuple
    ses: tuple
    trials: int
    seed: int

    def get(self, name: str) -> tuple[float, float]:
        j = self.components.index(name)
        return self.means[j], self.ses[j]

    @classmethod
    def from_rows(cls, rows: Sequence[dict]) -> MCEstimate:
        return cls(
            tuple(r["component"] for r in rows), tuple(float(r["mean"]) for r in rows),
            tuple(float(r["se"]) for r in rows), int(rows[0]["trials"]), int(rows[0]["seed"]),
        )

    def rows(self) -> list[dict]:
        return [
            {"component": c, "mean": m, "se": s, "trials": self.trials, "seed": self.seed}
            for c, m, s in zip(self.components, self.means, self.ses)
        ]


MIN_TRIALS = 1000


def mc_estimate(
    automaton: StrategyAutomaton,
    prior: Prior,
    k: float,
    trials: int,
    seed: int,
    **kwargs,
) -> MCEstimate:
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials for standard errors, got {trials}")
    batch = simulate_batch(automaton, prior, k, trials, seed, **kwargs)
    cols = [batch.broker_totals[:, i] for i in range(automaton.n)] + [batch.agent_total, batch.stop_period.astype(float)]
    names = tuple(f"V{i + 1}" for i in range(automaton.n)) + ("U", "T")
    means = tuple(float(c.mean()) for c in cols)
    ses = tuple(float(c.std(ddof=1) / math.sqrt(trials)) for c in cols)
    return MCEstimate(names, means, ses, trials, seed)
