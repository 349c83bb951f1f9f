"""Age penalty g, its cumulative form G and the marginal-reduction map M.

``M(x) = g(x) * x - G(x)`` is the destination's marginal benefit from
shrinking the interarrival time; the optimal rate equates it with a virtual
cost, so most of the library goes through :meth:`invert_marginal_reduction`.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, DomainError
from .numerics import bisect_increasing, bisect_increasing_vec


def _check_nonneg(x, what):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"{what} must be non-negative, got {x!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class AoiCostModel:
    """Base class; use :meth:`power`, :meth:`tabulated` or :meth:`from_dict`."""

    kind = "abstract"

    @staticmethod
    def power(alpha):
        return PowerCost(alpha)

    @staticmethod
    def tabulated(points):
        return TabulatedCost(points)

    @staticmethod
    def from_dict(spec):
        kind = spec.get("kind")
        if kind == "power":
            return PowerCost(float(spec["alpha"]))
        if kind == "tabulated":
            return TabulatedCost(spec["points"])
        raise ConfigError(f"unknown AoI cost kind {kind!r}")

    def to_dict(self):
        raise NotImplementedError

    # array-in/array-out primitives, no domain checks
    def _g(self, x):
        raise NotImplementedError

    def _G(self, x):
        raise NotImplementedError

    def _M(self, x):
        return self._g(x) * x - self._G(x)

    def _Minv(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return np.asarray(bisect_increasing(lambda x: float(self._M(x)), float(t)))
        return bisect_increasing_vec(self._M, t)

    def g(self, age):
        a = _check_nonneg(age, "age")
        return _out(self._g(a), age)

    def G(self, x):
        a = _check_nonneg(x, "interarrival time")
        return _out(self._G(a), x)

    def marginal_reduction(self, x):
        a = _check_nonneg(x, "interarrival time")
        return _out(np.where(a > 0, self._M(a), 0.0), x)

    def invert_marginal_reduction(self, target):
        t = _check_nonneg(target, "target")
        return _out(self._Minv(t), target)

    def rate_for_virtual_cost(self, v):
        """``1 / M^{-1}(v)``; infinite where ``v == 0``."""
        x = self._Minv(np.asarray(v, dtype=float))
        with np.errstate(divide="ignore"):
            return np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), np.inf)

    def reduction_at_rate(self, F):
        """``M(1/F)`` with the limits ``M(inf) = inf`` and ``M(0) = 0``."""
        F = np.asarray(F, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.where(F > 0, 1.0 / np.where(F > 0, F, 1.0), np.inf)
        finite = np.isfinite(x)
        return np.where(finite, self._M(np.where(finite, x, 1.0)), np.inf)


class PowerCost(AoiCostModel):
    """``g(age) = age ** alpha``."""

    kind = "power"

    def __init__(self, alpha):
        alpha = float(alpha)
        if not alpha > 0:
            raise ConfigError(f"power AoI cost needs alpha > 0, got {alpha}")
        self.alpha = alpha

    def __repr__(self):
        return f"PowerCost(alpha={self.alpha})"

    def __eq__(self, other):
        return isinstance(other, PowerCost) and other.alpha == self.alpha

    def __hash__(self):
        return hash(("power", self.alpha))

    def to_dict(self):
        return {"kind": "power", "alpha": self.alpha}

    def _g(self, x):
        return np.power(x, self.alpha)

    def _G(self, x):
        return np.power(x, self.alpha + 1.0) / (self.alpha + 1.0)

    def _M(self, x):
        a = self.alpha
        return a / (a + 1.0) * np.power(x, a + 1.0)

    def _Minv(self, t):
        a = self.alpha
        return np.power((1.0 + 1.0 / a) * np.asarray(t, dtype=float), 1.0 / (1.0 + a))


class TabulatedCost(AoiCostModel):
    """Piecewise-linear ``g`` through ``(age, penalty)`` knots.

    Extrapolates linearly past the last knot. A knot at age 0 with penalty 0
    is prepended when the table starts later.
    """

    kind = "tabulated"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ConfigError("tabulated AoI cost needs >= 2 (age, penalty) pairs")
        if pts[0, 0] < 0:
            raise ConfigError("ages must be non-negative")
        if pts[0, 0] > 0:
            pts = np.vstack([[0.0, 0.0], pts])
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ConfigError("tabulated ages must be strictly increasing")
        if np.any(np.diff(pts[:, 1]) <= 0) or pts[0, 1] < 0:
            raise ConfigError("tabulated penalties must be non-negative and strictly increasing")
        self.ages = pts[:, 0].copy()
        self.penalties = pts[:, 1].copy()
        seg = np.diff(self.ages) * 0.5 * (self.penalties[1:] + self.penalties[:-1])
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._last_slope = ((self.penalties[-1] - self.penalties[-2])
                            / (self.ages[-1] - self.ages[-2]))

    def __repr__(self):
        return f"TabulatedCost({len(self.ages)} knots)"

    def to_dict(self):
        return {"kind": "tabulated",
                "points": [[float(a), float(p)] for a, p in zip(self.ages, self.penalties)]}

    def _g(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, self.ages, self.penalties)
        beyond = self.penalties[-1] + self._last_slope * (x - self.ages[-1])
        return np.where(x > self.ages[-1], beyond, inside)

    def _G(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.ages, x, side="right") - 1, 0, len(self.ages) - 1)
        base = self._cum[k]
        return base + (x - self.ages[k]) * 0.5 * (self.penalties[k] + self._g(x))


def g_eval(model, age):
    return model.g(age)


def G_eval(model, x):
    return model.G(x)


def marginal_reduction(model, x):
    return model.marginal_reduction(x)


def invert_marginal_reduction(model, target):
    return model.invert_marginal_reduction(target)
