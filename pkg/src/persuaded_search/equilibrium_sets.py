"""Feasible payoff polytopes and certified bounds on equilibrium payoff sets.

Payoff vectors are ordered brokers first, agent last. All polytopes built
here are simplices or products of simplices with an interval, so their vertex
lists are known in closed form; linear projections are evaluated on vertices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .contracts import PayoffProfile, Thresholds, compute_thresholds, is_feasible
from .errors import DomainError
from .prior import Prior
from .search_core import check_cost, surplus_bounds

POINT_TOL = 1e-9


@dataclass(frozen=True)
class Polytope:
    """Intersection of halfspaces ``normal . y <= offset`` with its vertices.

    Attributes:
        dimension: length of payoff vectors (brokers plus agent).
        normals: array of shape (m, dimension).
        offsets: array of shape (m,).
        labels: one name per halfspace.
        named_vertices: ``(label, PayoffProfile)`` pairs; for every polytope
            built in this module the list is the complete vertex set.
    """

    dimension: int
    normals: np.ndarray
    offsets: np.ndarray
    labels: tuple = ()
    named_vertices: tuple = ()

    def contains(self, y, tol: float = POINT_TOL) -> bool:
        v = y.as_array() if isinstance(y, PayoffProfile) else np.asarray(y, dtype=float)
        return bool(np.all(self.normals @ v <= self.offsets + tol))

    def vertex_array(self) -> np.ndarray:
        return np.array([p.as_array() for _, p in self.named_vertices])

    def vertex(self, label: str) -> PayoffProfile:
        for name, p in self.named_vertices:
            if name == label:
                return p
        raise KeyError(label)

    def project(self, weights: Sequence[float]) -> tuple[float, float]:
        """Range of ``weights . y`` over the polytope."""
        vals = self.vertex_array() @ np.asarray(weights, dtype=float)
        return float(vals.min()), float(vals.max())

    def contains_polytope(self, other: Polytope, tol: float = POINT_TOL) -> bool:
        return all(self.contains(p, tol) for _, p in other.named_vertices)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "halfspaces": [
                {"label": lab, "normal": list(map(float, a)), "offset": float(b)}
                for lab, a, b in zip(self.labels, self.normals, self.offsets)
            ],
            "vertices": [{"label": lab, "profile": p.to_dict()} for lab, p in self.named_vertices],
        }

    @classmethod
    def from_dict(cls, spec: dict) -> Polytope:
        hs = spec["halfspaces"]
        return cls(
            int(spec["dimension"]),
            np.array([h["normal"] for h in hs], dtype=float).reshape(len(hs), int(spec["dimension"])),
            np.array([h["offset"] for h in hs], dtype=float),
            tuple(h["label"] for h in hs),
            tuple((v["label"], PayoffProfile.from_dict(v["profile"])) for v in spec["vertices"]),
        )

    def __eq__(self, other):
        if not isinstance(other, Polytope):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.labels == other.labels
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.offsets, other.offsets)
            and self.named_vertices == other.named_vertices
        )

    __hash__ = None


def _feasible_halfspaces(n: int, autarky: float, mccall: float):
    d = n + 1
    rows, offs, labels = [], [], []
    for i in range(n):
        a = np.zeros(d)
        a[i] = -1.0
        rows.append(a), offs.append(0.0), labels.append(f"broker_{i + 1}_nonnegative")
    a = np.zeros(d)
    a[n] = -1.0
    rows.append(a), offs.append(-autarky), labels.append("agent_at_least_autarky")
    rows.append(np.ones(d)), offs.append(mccall), labels.append("total_at_most_mccall")
    return rows, offs, labels


def _profile(n: int, slot: int | None, broker_value: float, agent: float) -> PayoffProfile:
    brokers = [0.0] * n
    if slot is not None:
        brokers[slot] = broker_value
    return PayoffProfile(tuple(brokers), agent)


def autarky_profile(prior: Prior, k: float, n: int) -> PayoffProfile:
    return _profile(n, None, 0.0, surplus_bounds(prior, k).autarky)


def bertrand_profile(prior: Prior, k: float, n: int) -> PayoffProfile:
    return _profile(n, None, 0.0, surplus_bounds(prior, k).mccall)


def feasible_set(prior: Prior, k: float, n: int) -> Polytope:
    """Profiles with nonnegative broker payoffs, agent at least autarky and
    total at most the McCall payoff."""
    if n < 1:
        raise ValueError("need at least one broker")
    sb = surplus_bounds(prior, k)
    rows, offs, labels = _feasible_halfspaces(n, sb.autarky, sb.mccall)
    verts = [("yA", _profile(n, None, 0.0, sb.autarky)), ("yB", _profile(n, None, 0.0, sb.mccall))]
    verts += [(f"broker_{i + 1}_optimum", _profile(n, i, sb.full_surplus, sb.autarky)) for i in range(n)]
    return Polytope(n + 1, np.array(rows), np.array(offs), tuple(labels), tuple(verts))


def eps_collar(prior: Prior, k: float, n: int, eps: float) -> Polytope:
    """Feasible profiles whose broker payoffs sum to at most ``eps``."""
    if not eps > 0.0:
        raise DomainError(f"collar width must be positive, got {eps}")
    sb = surplus_bounds(prior, k)
    if eps >= sb.full_surplus:
        return feasible_set(prior, k, n)
    rows, offs, labels = _feasible_halfspaces(n, sb.autarky, sb.mccall)
    a = np.ones(n + 1)
    a[n] = 0.0
    rows.append(a), offs.append(eps), labels.append("broker_total_at_most_eps")
    verts = [("yA", _profile(n, None, 0.0, sb.autarky)), ("yB", _profile(n, None, 0.0, sb.mccall))]
    for i in range(n):
        verts.append((f"broker_{i + 1}_eps_low", _profile(n, i, eps, sb.autarky)))
        verts.append((f"broker_{i + 1}_eps_high", _profile(n, i, eps, sb.mccall - eps)))
    return Polytope(n + 1, np.array(rows), np.array(offs), tuple(labels), tuple(verts))


def point_polytope(y: PayoffProfile, label: str) -> Polytope:
    d = y.n + 1
    eye = np.eye(d)
    v = y.as_array()
    normals = np.vstack([eye, -eye])
    offsets = np.concatenate([v, -v])
    labels = tuple(f"coord_{j}_upper" for j in range(d)) + tuple(f"coord_{j}_lower" for j in range(d))
    return Polytope(d, normals, offsets, labels, ((label, y),))


def monopoly_triangle(prior: Prior, k: float, nu: float) -> Polytope:
    """Convex hull of (ubar - ulow, ulow), (nu, ulow) and (nu, ubar - nu)."""
    sb = surplus_bounds(prior, k)
    if not -POINT_TOL <= nu <= sb.full_surplus + POINT_TOL:
        raise DomainError(f"nu={nu} outside [0, {sb.full_surplus}]")
    rows = [np.array([-1.0, 0.0]), np.array([0.0, -1.0]), np.array([1.0, 1.0])]
    offs = [-nu, -sb.autarky, sb.mccall]
    verts = (
        ("monopoly_point", PayoffProfile((sb.full_surplus,), sb.autarky)),
        ("punish", PayoffProfile((nu,), sb.autarky)),
        ("reward", PayoffProfile((nu,), sb.mccall - nu)),
    )
    return Polytope(2, np.array(rows), np.array(offs), ("broker_at_least_nu", "agent_at_least_autarky", "total_at_most_mccall"), verts)


# -- descriptors ---------------------------------------------------------------


class Regime(str, enum.Enum):
    FOLK_THEOREM = "FolkTheorem"
    MONOPOLY_POINT = "MonopolyPoint"
    PARTIAL = "PartialCharacterization"


class Membership(str, enum.Enum):
    IN = "In"
    OUT = "Out"
    UNKNOWN = "Unknown"


InnerElement = Union[Polytope, PayoffProfile]


@dataclass(frozen=True)
class EquilibriumDescriptor:
    """Certified inner and outer bounds on the equilibrium payoff set."""

    regime: Regime
    k: float
    n: int
    certified_inner: tuple
    certified_outer: Polytope
    notes: tuple = field(default=())

    def to_dict(self) -> dict:
        inner = []
        for el in self.certified_inner:
            if isinstance(el, Polytope):
                inner.append({"type": "polytope", "value": el.to_dict()})
            else:
                inner.append({"type": "point", "value": el.to_dict()})
        return {
            "regime": self.regime.value,
            "k": self.k,
            "n": self.n,
            "certified_inner": inner,
            "certified_outer": self.certified_outer.to_dict(),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, spec: dict) -> EquilibriumDescriptor:
        inner = []
        for el in spec["certified_inner"]:
            if el["type"] == "polytope":
                inner.append(Polytope.from_dict(el["value"]))
            else:
                inner.append(PayoffProfile.from_dict(el["value"]))
        return cls(
            Regime(spec["regime"]), float(spec["k"]), int(spec["n"]), tuple(inner),
            Polytope.from_dict(spec["certified_outer"]), tuple(spec.get("notes", ())),
        )


def monopoly_point(prior: Prior, k: float) -> PayoffProfile:
    sb = surplus_bounds(prior, k)
    return PayoffProfile((sb.full_surplus,), sb.autarky)


def equilibrium_descriptor(prior: Prior, k: float, n: int, thresholds: Thresholds | None = None) -> EquilibriumDescriptor:
    """Bounds on the equilibrium payoff set for ``n`` brokers at cost ``k``."""
    check_cost(prior, k)
    if n < 1:
        raise ValueError("need at least one broker")
    th = thresholds or compute_thresholds(prior)
    feas = feasible_set(prior, k, n)
    if k <= th.k_star:
        return EquilibriumDescriptor(Regime.FOLK_THEOREM, k, n, (feas,), feas)
    if n == 1:
        point = monopoly_point(prior, k)
        return EquilibriumDescriptor(Regime.MONOPOLY_POINT, k, n, (point,), point_polytope(point, "monopoly_point"))
    yb = bertrand_profile(prior, k, n)
    if k <= th.k_double_star:
        collar = eps_collar(prior, k, n, th.epsilon)
        return EquilibriumDescriptor(
            Regime.PARTIAL, k, n, (collar, yb), feas,
            (f"inner bound is the collar of width {th.epsilon:.6g} plus the Bertrand profile",),
        )
    return EquilibriumDescriptor(Regime.PARTIAL, k, n, (yb,), feas, ("only the Bertrand profile is certified",))


def _inner_contains(el: InnerElement, y: PayoffProfile, tol: float) -> bool:
    if isinstance(el, Polytope):
        return el.contains(y, tol)
    return el.n == y.n and float(np.max(np.abs(el.as_array() - y.as_array()))) <= tol


def membership(prior: Prior, k: float, n: int, y: PayoffProfile, tol: float = POINT_TOL) -> Membership:
    """Classify ``y`` against the certified bounds of the equilibrium set."""
    if y.n != n or not is_feasible(prior, k, y, tol):
        return Membership.OUT
    desc = equilibrium_descriptor(prior, k, n)
    if any(_inner_contains(el, y, tol) for el in desc.certified_inner):
        return Membership.IN
    if desc.regime == Regime.MONOPOLY_POINT or not desc.certified_outer.contains(y, tol):
        return Membership.OUT
    return Membership.UNKNOWN


def descriptor_is_consistent(desc: EquilibriumDescriptor, tol: float = POINT_TOL) -> bool:
    """Every inner element lies inside the outer polytope."""
    for el in desc.certified_inner:
        if isinstance(el, Polytope):
            if not desc.certified_outer.contains_polytope(el, tol):
                return False
        elif not desc.certified_outer.contains(el, tol):
            return False
    return True


# -- welfare projections ---------------------------------------------------------


def _merge(intervals: list[tuple[float, float]], tol: float = POINT_TOL) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


def _image(el: InnerElement, weights: np.ndarray) -> tuple[float, float]:
    if isinstance(el, Polytope):
        return el.project(weights)
    v = float(el.as_array() @ weights)
    return v, v


@dataclass(frozen=True)
class WelfareSets:
    """Interval unions of total surplus and agent payoff over the bounds."""

    surplus_inner: tuple
    agent_inner: tuple
    surplus_outer: tuple
    agent_outer: tuple

    def to_dict(self) -> dict:
        return {key: [list(iv) for iv in getattr(self, key)] for key in ("surplus_inner", "agent_inner", "surplus_outer", "agent_outer")}


def welfare_sets(desc: EquilibriumDescriptor) -> WelfareSets:
    d = desc.n + 1
    total = np.ones(d)
    agent = np.zeros(d)
    agent[-1] = 1.0
    return WelfareSets(
        tuple(_merge([_image(el, total) for el in desc.certified_inner])),
        tuple(_merge([_image(el, agent) for el in desc.certified_inner])),
        (desc.certified_outer.project(total),),
        (desc.certified_outer.project(agent),),
    )


class Rule(str, enum.Enum):
    MIN_SURPLUS = "MinSurplus"
    MAX_SURPLUS = "MaxSurplus"
    MIN_AGENT = "MinAgent"
    MAX_AGENT = "MaxAgent"


class Preference(str, enum.Enum):
    MONOPOLY = "Monopoly"
    COMPETITION = "Competition"
    TIE = "Tie"


def _selected_range(ws: WelfareSets, rule: Rule) -> tuple[float, float]:
    """Range in which the rule's value of the true equilibrium set must lie.

    For a set S with inner <= S <= outer, inf S lies between inf outer and
    inf inner, and sup S between sup inner and sup outer.
    """
    inner, outer = (ws.surplus_inner, ws.surplus_outer) if rule in (Rule.MIN_SURPLUS, Rule.MAX_SURPLUS) else (ws.agent_inner, ws.agent_outer)
    if rule in (Rule.MIN_SURPLUS, Rule.MIN_AGENT):
        return min(lo for lo, _ in outer), min(lo for lo, _ in inner)
    return max(hi for _, hi in inner), max(hi for _, hi in outer)


def regulator_compare(prior: Prior, k: float, n: int, rule: Rule | str, tol: float = POINT_TOL) -> Preference:
    """Weak preference between one broker and ``n`` brokers under ``rule``.

    The regulator ranks structures by the selected value (worst case for Min
    rules, best case for Max rules), higher being better.

    Raises:
        ValueError: if the certified bounds cannot rank the two structures.
    """
    if n < 2:
        raise ValueError("comparison needs n > 1")
    rule = Rule(rule)
    mono = _selected_range(welfare_sets(equilibrium_descriptor(prior, k, 1)), rule)
    comp = _selected_range(welfare_sets(equilibrium_descriptor(prior, k, n)), rule)
    if max(abs(mono[0] - comp[0]), abs(mono[1] - comp[1]), mono[1] - mono[0], comp[1] - comp[0]) <= tol:
        return Preference.TIE
    if mono[0] >= comp[1] - tol:
        return Preference.MONOPOLY
    if comp[0] >= mono[1] - tol:
        return Preference.COMPETITION
    raise ValueError(f"certified bounds do not rank the structures under {rule.value}: monopoly {mono}, competition {comp}")


# -- strict interior of the collar -------------------------------------------------


@dataclass(frozen=True)
class CollarBall:
    center: PayoffProfile
    radius: float
    delta: float
    corners_ok: bool


def collar_interior_ball(prior: Prior, k: float, n: int, eps: float | None = None) -> CollarBall:
    """An L-infinity ball inside the collar whose points all keep total
    surplus at least ``delta`` below McCall and the agent at least ``delta``
    above autarky.

    Raises:
        DomainError: if the computed margin ``delta`` is not positive.
    """
    sb = surplus_bounds(prior, k)
    eps = compute_thresholds(prior).epsilon if eps is None else eps
    delta = min(eps / 4.0, (sb.full_surplus - eps) / 4.0)
    if not delta > 0.0:
        raise DomainError(f"no positive margin: eps={eps}, full surplus={sb.full_surplus}")
    center = PayoffProfile(tuple([eps / (2 * n)] * n), sb.autarky + 2.0 * delta)
    radius = delta / (2.0 * (n + 1))
    collar = eps_collar(prior, k, n, eps)
    c = center.as_array()
    ok = True
    for signs in np.array(np.meshgrid(*[[-1.0, 1.0]] * (n + 1))).T.reshape(-1, n + 1):
        v = c + radius * signs
        y = PayoffProfile.from_array(v)
        ok &= collar.contains(y, 0.0) and y.total() + delta < sb.mccall and y.agent_payoff - delta > sb.autarky
    return CollarBall(center, radius, delta, bool(ok))
