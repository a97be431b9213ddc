"""Quality distributions on [0, 1] and the quantities derived from them.

All three families admit closed forms for the CDF and for the partial
expectation ``E[theta; theta <= x]``, from which conditional means and the
integral transform ``c_F(u) = int_u^1 (1 - F(m)) dm`` follow exactly.  A
composite Gauss-Legendre route through the CDF alone is kept alongside as an
independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DegenerateConditioningError, DomainError

UNIFORM = "uniform01"
BETA = "beta"
TABULATED = "tabulated"

_GL_ORDER = 10


@dataclass(frozen=True)
class Prior:
    """Absolutely continuous distribution of quality on [0, 1].

    Use the constructors :meth:`uniform`, :meth:`beta_dist` and
    :meth:`tabulated` rather than building instances by hand.

    Attributes:
        family: one of ``"uniform01"``, ``"beta"``, ``"tabulated"``.
        params: ``()`` for uniform, ``(a, b)`` for beta, and for tabulated a
            tuple of ``(theta, F(theta))`` breakpoints running from (0, 0)
            to (1, 1), strictly increasing in both coordinates.
        quadrature_resolution: panel count for the numeric integration route.
    """

    family: str
    params: tuple = ()
    quadrature_resolution: int = field(default=64, compare=False)

    def __post_init__(self):
        if self.quadrature_resolution < 1:
            raise ValueError("quadrature_resolution must be positive")
        if self.family == UNIFORM:
            if self.params:
                raise ValueError("uniform01 takes no parameters")
        elif self.family == BETA:
            a, b = self.params
            if not (a > 0 and b > 0):
                raise ValueError(f"beta parameters must be positive, got {self.params}")
        elif self.family == TABULATED:
            pts = np.asarray(self.params, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError("tabulated prior needs a list of (theta, F) pairs")
            th, fv = pts[:, 0], pts[:, 1]
            if th[0] != 0.0 or th[-1] != 1.0 or fv[0] != 0.0 or fv[-1] != 1.0:
                raise ValueError("tabulated breakpoints must start at (0, 0) and end at (1, 1)")
            if np.any(np.diff(th) <= 0) or np.any(np.diff(fv) <= 0):
                raise ValueError("tabulated breakpoints must be strictly increasing in both coordinates")
        else:
            raise ValueError(f"unknown prior family {self.family!r}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def uniform(cls, quadrature_resolution: int = 64) -> Prior:
        return cls(UNIFORM, (), quadrature_resolution)

    @classmethod
    def beta_dist(cls, a: float, b: float, quadrature_resolution: int = 64) -> Prior:
        return cls(BETA, (float(a), float(b)), quadrature_resolution)

    @classmethod
    def tabulated(cls, breakpoints: Sequence[Sequence[float]], quadrature_resolution: int = 64) -> Prior:
        pts = tuple((float(t), float(f)) for t, f in breakpoints)
        return cls(TABULATED, pts, quadrature_resolution)

    # -- tabulated helpers -------------------------------------------------

    @cached_property
    def _table(self):
        pts = np.asarray(self.params, dtype=float)
        th, fv = pts[:, 0], pts[:, 1]
        dens = np.diff(fv) / np.diff(th)
        seg_pe = dens * (th[1:] ** 2 - th[:-1] ** 2) / 2.0
        cum_pe = np.concatenate([[0.0], np.cumsum(seg_pe)])
        return th, fv, dens, cum_pe

    # -- core evaluations (scalar or array, no domain checks) --------------

    def _cdf(self, t):
        t = np.clip(t, 0.0, 1.0)
        if self.family == UNIFORM:
            return t
        if self.family == BETA:
            a, b = self.params
            return special.betainc(a, b, t)
        th, fv, _, _ = self._table
        return np.interp(t, th, fv)

    def _partial_expectation(self, x):
        x = np.clip(x, 0.0, 1.0)
        if self.family == UNIFORM:
            return x * x / 2.0
        if self.family == BETA:
            a, b = self.params
            return a / (a + b) * special.betainc(a + 1.0, b, x)
        th, _, dens, cum_pe = self._table
        x_arr = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(th, x_arr, side="right") - 1, 0, len(dens) - 1)
        out = cum_pe[j] + dens[j] * (x_arr ** 2 - th[j] ** 2) / 2.0
        return out if out.ndim else float(out)

    # -- public API ---------------------------------------------------------

    def cdf(self, t: float) -> float:
        """F(t) for t in [0, 1]."""
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"cdf argument {t} outside [0, 1]")
        return float(self._cdf(t))

    def ppf(self, s):
        """Quantile function, vectorized over ``s`` in [0, 1]."""
        s = np.clip(s, 0.0, 1.0)
        if self.family == UNIFORM:
            return s
        if self.family == BETA:
            a, b = self.params
            return special.betaincinv(a, b, s)
        th, fv, _, _ = self._table
        return np.interp(s, fv, th)

    @cached_property
    def mean(self) -> float:
        """Prior mean quality."""
        if self.family == UNIFORM:
            return 0.5
        if self.family == BETA:
            a, b = self.params
            return a / (a + b)
        return float(self._table[3][-1])

    def partial_expectation(self, x: float) -> float:
        """int_0^x theta dF(theta)."""
        return float(self._partial_expectation(x))

    def cond_mean_below(self, x: float) -> float:
        """E[theta | theta <= x]."""
        fx = float(self._cdf(x))
        if fx <= 0.0:
            raise DegenerateConditioningError(f"F({x}) = 0; cannot condition on theta <= {x}")
        return float(self._partial_expectation(x)) / fx

    def cond_mean_above(self, x: float) -> float:
        """E[theta | theta >= x]."""
        fx = float(self._cdf(x))
        if fx >= 1.0:
            raise DegenerateConditioningError(f"F({x}) = 1; cannot condition on theta >= {x}")
        return (self.mean - float(self._partial_expectation(x))) / (1.0 - fx)

    def c_full(self, u):
        """c_F(u) = int_u^1 (1 - F(m)) dm, extended as ``mean - u`` below 0
        and 0 above 1. Accepts scalars or arrays."""
        u_arr = np.asarray(u, dtype=float)
        uc = np.clip(u_arr, 0.0, 1.0)
        if self.family == UNIFORM:
            inner = (1.0 - uc) ** 2 / 2.0
        else:
            # E[(theta - u)^+] = E[theta; theta > u] - u (1 - F(u))
            inner = (self.mean - self._partial_expectation(uc)) - uc * (1.0 - self._cdf(uc))
            inner = np.maximum(inner, 0.0)
        out = np.where(u_arr < 0.0, self.mean - u_arr, np.where(u_arr > 1.0, 0.0, inner))
        return float(out) if out.ndim == 0 else out

    # -- quadrature route ---------------------------------------------------

    def _knots(self, lo: float, hi: float) -> np.ndarray:
        pts = [lo, hi]
        if self.family == TABULATED:
            th = self._table[0]
            pts.extend(t for t in th if lo < t < hi)
        return np.unique(np.asarray(pts))

    def integrate(self, func, lo: float, hi: float) -> float:
        """Composite Gauss-Legendre integral of ``func`` over [lo, hi].

        Panels are split at tabulated breakpoints so that piecewise-linear
        CDFs are integrated exactly.
        """
        if hi <= lo:
            return 0.0
        nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
        total = 0.0
        knots = self._knots(lo, hi)
        for a, b in zip(knots[:-1], knots[1:]):
            # panels cluster toward the ends, where beta densities may blow up
            edges = a + (b - a) * (1.0 - np.cos(np.linspace(0.0, np.pi, self.quadrature_resolution + 1))) / 2.0
            half = (edges[1:] - edges[:-1]) / 2.0
            mid = (edges[1:] + edges[:-1]) / 2.0
            xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
            ws = (half[:, None] * weights[None, :]).ravel()
            total += float(np.dot(ws, func(xs)))
        return total

    def c_full_quadrature(self, u: float) -> float:
        """c_F(u) evaluated by integrating 1 - F numerically."""
        if u >= 1.0:
            return 0.0
        if u < 0.0:
            return self.mean_quadrature - u
        return self.integrate(lambda m: 1.0 - self._cdf(m), u, 1.0)

    @cached_property
    def mean_quadrature(self) -> float:
        return self.integrate(lambda m: 1.0 - self._cdf(m), 0.0, 1.0)

    def to_dict(self) -> dict:
        if self.family == UNIFORM:
            return {"family": UNIFORM}
        if self.family == BETA:
            return {"family": BETA, "a": self.params[0], "b": self.params[1]}
        return {"family": TABULATED, "breakpoints": [list(p) for p in self.params]}

    @classmethod
    def from_dict(cls, spec: dict) -> Prior:
        spec = dict(spec)
        family = spec.pop("family", None)
        res = spec.pop("quadrature_resolution", 64)
        if family == UNIFORM:
            prior = cls.uniform(res)
        elif family == BETA:
            prior = cls.beta_dist(spec.pop("a"), spec.pop("b"), res)
        elif family == TABULATED:
            prior = cls.tabulated(spec.pop("breakpoints"), res)
        else:
            raise ValueError(f"unknown prior family {family!r}")
        if spec:
            raise ValueError(f"unknown prior keys: {sorted(spec)}")
        return prior

    def __repr__(self) -> str:
        if self.family == UNIFORM:
            return "Prior.uniform()"
        if self.family == BETA:
            return f"Prior.beta_dist({self.params[0]:g}, {self.params[1]:g})"
        return f"Prior.tabulated({len(self.params)} breakpoints)"


def is_close(a: float, b: float, tol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
