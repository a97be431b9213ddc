"""Posterior-mean distributions generated by interval-partition signals.

A signal partitions [0, 1] into intervals and reports the cell containing the
realized quality; the posterior mean is the conditional mean of that cell.
Pass-fail signals are the one-cutpoint case, the uninformative signal has no
cutpoints, and full information reveals quality exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidSignalError
from .prior import Prior

UNINFORMATIVE = "uninformative"
FULL_INFO = "full_info"
PASS_FAIL = "pass_fail"
INTERVAL_PARTITION = "interval_partition"


@dataclass(frozen=True)
class Signal:
    """An information structure from the interval-partition family.

    Attributes:
        kind: ``"uninformative"``, ``"full_info"``, ``"pass_fail"`` or
            ``"interval_partition"``.
        cutpoints: strictly increasing interior cutpoints in (0, 1). A
            pass-fail signal has exactly one.
    """

    kind: str
    cutpoints: tuple = ()

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cutpoints)
        object.__setattr__(self, "cutpoints", cuts)
        if self.kind in (UNINFORMATIVE, FULL_INFO):
            if cuts:
                raise InvalidSignalError(f"{self.kind} signal takes no cutpoints")
        elif self.kind == PASS_FAIL:
            if len(cuts) != 1:
                raise InvalidSignalError("pass-fail signal needs exactly one threshold")
        elif self.kind != INTERVAL_PARTITION:
            raise InvalidSignalError(f"unknown signal kind {self.kind!r}")
        if any(not 0.0 < c < 1.0 for c in cuts):
            raise InvalidSignalError(f"cutpoints must lie in (0, 1), got {cuts}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise InvalidSignalError(f"cutpoints must be strictly increasing, got {cuts}")

    @classmethod
    def uninformative(cls) -> Signal:
        return cls(UNINFORMATIVE)

    @classmethod
    def full_info(cls) -> Signal:
        return cls(FULL_INFO)

    @classmethod
    def pass_fail(cls, x: float) -> Signal:
        return cls(PASS_FAIL, (x,))

    @classmethod
    def partition(cls, cutpoints) -> Signal:
        return cls(INTERVAL_PARTITION, tuple(cutpoints))

    @property
    def threshold(self) -> float:
        if self.kind != PASS_FAIL:
            raise InvalidSignalError("only pass-fail signals have a threshold")
        return self.cutpoints[0]

    @property
    def is_discrete(self) -> bool:
        return self.kind != FULL_INFO

    def validate(self, prior: Prior) -> None:
        """Raise if some cell has zero prior probability."""
        if not self.is_discrete:
            return
        edges = np.concatenate([[0.0], self.cutpoints, [1.0]])
        probs = np.diff(prior._cdf(edges))
        if np.any(probs <= 0.0):
            raise InvalidSignalError(f"{self} has a cell of zero prior probability")

    def to_dict(self) -> dict:
        if self.kind == PASS_FAIL:
            return {"kind": PASS_FAIL, "x": self.cutpoints[0]}
        if self.kind == INTERVAL_PARTITION:
            return {"kind": INTERVAL_PARTITION, "cutpoints": list(self.cutpoints)}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, spec: dict) -> Signal:
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == PASS_FAIL:
            sig = cls.pass_fail(spec.pop("x"))
        elif kind == INTERVAL_PARTITION:
            sig = cls.partition(spec.pop("cutpoints"))
        elif kind in (UNINFORMATIVE, FULL_INFO):
            sig = cls(kind)
        else:
            raise InvalidSignalError(f"unknown signal kind {kind!r}")
        if spec:
            raise InvalidSignalError(f"unknown signal keys: {sorted(spec)}")
        return sig

    def __repr__(self) -> str:
        if self.kind == PASS_FAIL:
            return f"PassFail({self.cutpoints[0]:.6g})"
        if self.kind == INTERVAL_PARTITION:
            return f"IntervalPartition({list(self.cutpoints)})"
        return "FullInfo" if self.kind == FULL_INFO else "Uninformative"


@lru_cache(maxsize=4096)
def atoms(signal: Signal, prior: Prior) -> tuple[np.ndarray, np.ndarray]:
    """Cell probabilities and cell conditional means of a discrete signal."""
    if not signal.is_discrete:
        raise InvalidSignalError("full information has no finite atom representation")
    signal.validate(prior)
    edges = np.concatenate([[0.0], signal.cutpoints, [1.0]])
    probs = np.diff(prior._cdf(edges))
    mass = np.diff(prior._partial_expectation(edges))
    means = mass / probs
    probs.setflags(write=False)
    means.setflags(write=False)
    return probs, means


def signal_cdf(signal: Signal, prior: Prior, m: float) -> float:
    """G(m): probability that the posterior mean is at most ``m``."""
    if not signal.is_discrete:
        return float(prior._cdf(m))
    probs, means = atoms(signal, prior)
    return float(min(1.0, probs[means <= m].sum()))


def c_value(signal: Signal, prior: Prior, u):
    """c_G(u) = int_u^1 (1 - G(m)) dm, as the atom sum ``sum_j p_j (m_j - u)^+``.

    Works for scalar or array ``u``.
    """
    if not signal.is_discrete:
        return prior.c_full(u)
    probs, means = atoms(signal, prior)
    u_arr = np.asarray(u, dtype=float)
    out = np.maximum(means - u_arr[..., None], 0.0) @ probs
    return float(out) if out.ndim == 0 else out


def c_pass_fail_max(prior: Prior, x, u):
    """c_{G^x}(u) as ``max{(m0 - u)^+, c_F(x) + (1 - F(x))(x - u)}``.

    An alternative evaluation of the pass-fail transform through F alone,
    vectorized over ``x`` and ``u``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    branch = prior.c_full(x) + (1.0 - prior._cdf(x)) * (x - u)
    out = np.maximum(np.maximum(prior.mean - u, 0.0), branch)
    return float(out) if out.ndim == 0 else out


def pass_fail_cells(prior: Prior, x):
    """Vectorized (F(x), E[theta | theta <= x], E[theta | theta >= x])."""
    x = np.asarray(x, dtype=float)
    fx = prior._cdf(x)
    pe = prior._partial_expectation(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        low = pe / fx
        high = (prior.mean - pe) / (1.0 - fx)
    return fx, low, high


def realize(signal: Signal, prior: Prior, theta):
    """Posterior mean reported when the good has quality ``theta``.

    Quality exactly at a cutpoint belongs to the lower cell. Vectorized.
    """
    if signal.kind == FULL_INFO:
        return theta
    if signal.kind == UNINFORMATIVE:
        return np.full_like(np.asarray(theta, dtype=float), prior.mean)[()]
    _, means = atoms(signal, prior)
    cell = np.searchsorted(np.asarray(signal.cutpoints), theta, side="left")
    return means[cell]


def mpc_check(signal: Signal, prior: Prior, grid_size: int = 1000) -> bool:
    """True when ``c_G <= c_F`` on a uniform grid and ``c_G(0)`` equals the mean."""
    grid = np.linspace(0.0, 1.0, grid_size)
    cg = c_value(signal, prior, grid)
    cf = prior.c_full(grid)
    return bool(np.all(cg <= cf + 1e-9) and abs(c_value(signal, prior, 0.0) - prior.mean) <= 1e-9)
