"""Brute-force checks of the monopolist's minimax payoff and of the
one-broker equilibrium payoff set.

Two independent routes are provided. The first evaluates the lower bound on
the monopolist's minimax payoff obtained from explicit deviation offers and
reads off its fixed points. The second iterates a self-generation operator
on a grid of payoff profiles, removing profiles that some deviation offer
(searched over a price x pass-threshold grid) makes unprofitable to support.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .contracts import compute_thresholds, phi, threshold_x
from .errors import DomainError, InconsistentCertificatesError, NonConvergenceError
from .prior import Prior
from .search_core import check_cost, surplus_bounds
from .signals import Signal, c_value, pass_fail_cells, signal_cdf

CERT_TOL = 1e-9


class MinimaxRegime(str, enum.Enum):
    NU_ZERO = "NuZero"
    NU_FULL_SURPLUS = "NuFullSurplus"


def minimax_lower_bound(prior: Prior, k: float, y1: float) -> float:
    """Payoff the monopolist secures by deviating when the continuation set's
    smallest broker payoff is ``y1``.

    Below the full surplus the bound comes from a free-information offer
    priced at the agent's indifference point; at the full surplus it comes
    from selling the pass-fail signal at the McCall threshold.
    """
    sb = surplus_bounds(prior, k)
    s = sb.full_surplus
    if not -CERT_TOL <= y1 <= s + CERT_TOL:
        raise DomainError(f"y1={y1} outside [0, {s}]")
    y1 = min(max(y1, 0.0), s)
    if sb.mccall - y1 < prior.mean:
        lb = prior.c_full(sb.autarky + y1) - k + y1
    else:
        lb = phi(prior, k) + y1 * (1.0 + float(prior._cdf(sb.autarky)))
    if y1 >= s - CERT_TOL:
        lb = max(lb, step1_value(prior, k))
    return max(lb, 0.0)


def step1_value(prior: Prior, k: float) -> float:
    """Deviation payoff from selling the pass-fail signal at the McCall
    threshold at the agent's indifference price, when every continuation
    gives the monopolist the full surplus and the agent autarky."""
    sb = surplus_bounds(prior, k)
    sig = Signal.pass_fail(threshold_x(prior, k, sb.mccall))
    price = c_value(sig, prior, sb.autarky) - c_value(Signal.uninformative(), prior, sb.autarky)
    return price + signal_cdf(sig, prior, sb.autarky) * sb.full_surplus


def reject_all_certificate(prior: Prior, k: float) -> bool:
    """True when even free full information, accepted into autarky, is no
    better for the agent than rejecting everything into the McCall payoff.

    Evaluated with the quadrature route for ``c_F``.
    """
    check_cost(prior, k)
    sb = surplus_bounds(prior, k)
    accept = prior.c_full_quadrature(sb.autarky) + sb.autarky
    reject = max(prior.mean_quadrature - sb.mccall, 0.0) + sb.mccall
    return accept <= reject + CERT_TOL


@dataclass(frozen=True)
class MinimaxReport:
    k: float
    phi_value: float
    y1_grid: tuple
    lower_bound_curve: tuple
    fixed_points: tuple
    regime: MinimaxRegime
    certificates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "phi_value": self.phi_value,
            "y1_grid": list(self.y1_grid),
            "lower_bound_curve": list(self.lower_bound_curve),
            "fixed_points": list(self.fixed_points),
            "regime": self.regime.value,
            "certificates": dict(self.certificates),
        }

    @classmethod
    def from_dict(cls, spec: dict) -> MinimaxReport:
        return cls(
            float(spec["k"]), float(spec["phi_value"]), tuple(spec["y1_grid"]),
            tuple(spec["lower_bound_curve"]), tuple(spec["fixed_points"]),
            MinimaxRegime(spec["regime"]), dict(spec["certificates"]),
        )


def scan_fixed_points(prior: Prior, k: float, grid_size: int = 200) -> MinimaxReport:
    """Classify the minimax payoff as 0 or the full surplus.

    Raises:
        InconsistentCertificatesError: if both or neither of the two
            certificates hold.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    sb = surplus_bounds(prior, k)
    s = sb.full_surplus
    grid = np.linspace(0.0, s, grid_size)
    lb = np.array([minimax_lower_bound(prior, k, y) for y in grid])
    reject_all = reject_all_certificate(prior, k)
    no_interior = bool(np.all(lb[:-1] > grid[:-1] + CERT_TOL))
    endpoint = bool(step1_value(prior, k) >= s - CERT_TOL)
    full = no_interior and endpoint
    certs = {"reject_all": reject_all, "no_interior_fixed_point": no_interior, "endpoint_fixed_point": endpoint}
    if reject_all == full:
        raise InconsistentCertificatesError(f"k={k}: certificates {certs} do not single out one regime")
    regime = MinimaxRegime.NU_ZERO if reject_all else MinimaxRegime.NU_FULL_SURPLUS
    fixed = (0.0, s) if reject_all else (s,)
    return MinimaxReport(k, phi(prior, k), tuple(grid), tuple(lb), fixed, regime, certs)


# -- self-generation on a grid -------------------------------------------------------


@dataclass
class APSResult:
    """Converged one-broker payoff set on a grid.

    ``occupancy[j, i]`` marks the profile (y1_grid[i], y2_grid[j]).
    """

    k: float
    y1_grid: np.ndarray
    y2_grid: np.ndarray
    occupancy: np.ndarray
    rounds: int
    sizes: list
    monotone: bool
    deviation_values: list

    @property
    def cell(self) -> float:
        return float(self.y1_grid[1] - self.y1_grid[0])

    def points(self) -> np.ndarray:
        jj, ii = np.nonzero(self.occupancy)
        return np.column_stack([self.y1_grid[ii], self.y2_grid[jj]])

    @property
    def min_broker_payoff(self) -> float:
        return float(self.points()[:, 0].min())

    def occupancy_csv(self) -> str:
        lines = ["agent\\broker," + ",".join(f"{v:.10g}" for v in self.y1_grid)]
        for j, y2 in enumerate(self.y2_grid):
            lines.append(f"{y2:.10g}," + ",".join(str(int(b)) for b in self.occupancy[j]))
        return "\n".join(lines) + "\n"


def _deviation_value(prior, k, punish, reward, xs, prices):
    """Monopolist's best payoff over the offer grid when acceptance leads to
    ``punish`` and rejection to ``reward`` (both (broker, agent) pairs).

    The agent accepts only when strictly better off.
    """
    pi, pa = punish
    ri, ra = reward
    reject_value = max(prior.mean - ra, 0.0) + ra
    reject_payoff = ri if prior.mean <= ra else 0.0
    fx, low, high = pass_fail_cells(prior, xs)
    c_pf = fx * np.maximum(low - pa, 0.0) + (1.0 - fx) * np.maximum(high - pa, 0.0)
    g_pf = fx * (low <= pa) + (1.0 - fx) * (high <= pa)
    c_all = np.concatenate([c_pf, [prior.c_full(pa)]])
    g_all = np.concatenate([g_pf, [float(prior._cdf(pa))]])
    accept = c_all[:, None] + pa - prices[None, :] > reject_value
    value = np.where(accept, prices[None, :] + g_all[:, None] * pi, reject_payoff)
    return float(value.max())


def aps_iterate(
    prior: Prior,
    k: float,
    resolution: int = 100,
    x_grid=None,
    price_grid=None,
    max_rounds: int = 500,
    tol: float = 1e-9,
) -> APSResult:
    """Shrink the feasible grid until every remaining profile is supported by
    continuation profiles drawn from the remaining set.

    Each round uses the three-point continuation form: the profile itself on
    path, and after a deviation the lowest- and highest-agent-payoff profiles
    of the column with the smallest broker payoff.

    Raises:
        NonConvergenceError: if the set is still shrinking after
            ``max_rounds`` rounds.
    """
    if resolution < 50:
        raise ValueError("resolution must be at least 50")
    sb = surplus_bounds(prior, k)
    s = sb.full_surplus
    y1 = np.linspace(0.0, s, resolution)
    y2 = np.linspace(sb.autarky, sb.mccall, resolution)
    xs = np.linspace(0.0, 1.0, 801)[1:-1] if x_grid is None else np.asarray(x_grid, dtype=float)
    prices = np.linspace(0.0, sb.mccall, 4001) if price_grid is None else np.asarray(price_grid, dtype=float)
    ii, jj = np.meshgrid(np.arange(resolution), np.arange(resolution))
    occ = ii + jj <= resolution - 1

    # stationary on-path play generates a profile when the pass-fail offer at
    # x_k(total) returns the agent its payoff; this depends only on the total
    totals = {}
    for t in np.unique(ii + jj):
        tot = sb.autarky + t * (s / (resolution - 1))
        x = threshold_x(prior, k, min(tot, sb.mccall))
        q = 1.0 - float(prior._cdf(x))
        totals[t] = abs(prior.cond_mean_above(x) - k / q - min(tot, sb.mccall)) <= 1e-7
    generated = np.vectorize(lambda t: totals.get(t, False))(ii + jj)
    occ &= generated

    sizes = [int(occ.sum())]
    devs = []
    monotone = True
    for rnd in range(1, max_rounds + 1):
        cols = np.nonzero(occ.any(axis=0))[0]
        if cols.size == 0:
            raise NonConvergenceError("the payoff set became empty")
        c = cols[0]
        rows = np.nonzero(occ[:, c])[0]
        nu = y1[c]
        punish = (nu, y2[rows[0]])
        reward = (nu, y2[rows[-1]])
        d = _deviation_value(prior, k, punish, reward, xs, prices)
        devs.append(d)
        new = occ & (y1[None, :] >= d - tol)
        if np.any(new & ~occ):
            monotone = False
        if np.array_equal(new, occ):
            return APSResult(k, y1, y2, occ, rnd, sizes, monotone, devs)
        occ = new
        sizes.append(int(occ.sum()))
    raise NonConvergenceError(f"set still shrinking after {max_rounds} rounds")


def characterization_points(prior: Prior, k: float, density: int = 400) -> np.ndarray:
    """Dense sample of the closed-form one-broker equilibrium payoff set:
    the feasible triangle at or below k*, the monopoly point above."""
    sb = surplus_bounds(prior, k)
    if k > compute_thresholds(prior).k_star:
        return np.array([[sb.full_surplus, sb.autarky]])
    a = np.linspace(0.0, sb.full_surplus, density)
    p1, p2 = np.meshgrid(a, a)
    keep = p1 + p2 <= sb.full_surplus + 1e-15
    return np.column_stack([p1[keep], sb.autarky + p2[keep]])


def hausdorff_cells(result: APSResult, prior: Prior, k: float) -> float:
    """L-infinity Hausdorff distance, in grid cells, between the converged
    set and the closed-form characterization."""
    a = result.points()
    b = characterization_points(prior, k)
    d_ab = cKDTree(b).query(a, p=np.inf)[0].max()
    d_ba = cKDTree(a).query(b, p=np.inf)[0].max()
    return float(max(d_ab, d_ba) / result.cell)
