"""Optimal single-source mechanism and its naive (non-IC) counterpart."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aoi_cost import AoiCostModel, PowerCost
from .cost_dist import CostDistribution
from .errors import ConfigError
from .numerics import gl_nodes, integrate_sqrt_substituted

DEFAULT_FMAX = 1e9
PAYMENT_TOL = 1e-9


@dataclass(frozen=True)
class PriceQuote:
    """Per-update price and constant interarrival time for one report."""

    price: float
    interarrival: float
    trade: bool = True


NO_TRADE = PriceQuote(price=0.0, interarrival=math.inf, trade=False)


def _tails_from_cells(fn, pts, origin, c_high, nodes):
    """``integral of fn over [p, c_high]`` for each sorted point ``p``.

    Integrates cell by cell in ``u`` with ``z = origin + u**2`` so that a
    ``1/sqrt`` blow-up of the rate at ``origin`` becomes smooth, then sums
    the cells from the top down.
    """
    a, b = pts[:-1], pts[1:]
    ua = np.sqrt(np.maximum(a - origin, 0.0))
    ub = np.sqrt(np.maximum(b - origin, 0.0))
    u, w = gl_nodes(ua, ub, nodes)
    z = origin + u * u
    cells = np.sum(w * 2.0 * u * fn(np.minimum(z, c_high)), axis=1)
    return np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])


class SingleSourceMechanism:
    """Rate rule ``f* = min(f_max, 1 / M^{-1}(phi_tilde(c)))`` with minimal IR payments."""

    def __init__(self, dist: CostDistribution, aoi: AoiCostModel, f_max: float = DEFAULT_FMAX):
        if not f_max >= 0:
            raise ConfigError(f"f_max must be non-negative, got {f_max}")
        self.dist = dist
        self.aoi = aoi
        self.f_max = float(f_max)

    def __repr__(self):
        return f"SingleSourceMechanism({self.dist!r}, {self.aoi!r}, f_max={self.f_max:g})"

    @property
    def c_low(self):
        return self.dist.c_low

    @property
    def c_high(self):
        return self.dist.c_high

    def _rate(self, c):
        if self.f_max == 0.0:
            return np.zeros(np.shape(c))
        v = self.dist.ironed._eval(np.asarray(c, dtype=float))
        return np.minimum(self.f_max, self.aoi.rate_for_virtual_cost(v))

    def rate(self, c):
        """Optimal update rate for reported cost ``c`` (scalar or array)."""
        cc = self.dist._check(c)
        out = self._rate(cc)
        return float(out) if np.ndim(c) == 0 else out

    def breakpoints(self):
        """Support ends, prior kinks, ironed-interval ends and where ``f_max`` stops binding."""
        pts = {self.c_low, self.c_high, *map(float, self.dist.kinks())}
        for a, b in self.dist.ironed.intervals:
            pts.update((a, b))
        if 0.0 < self.f_max < math.inf:
            kink = float(self.dist.invert_ironed(self.aoi.reduction_at_rate(self.f_max)))
            if self.c_low < kink < self.c_high:
                pts.add(kink)
        return np.array(sorted(pts))

    def tail_integral(self, c, tol=PAYMENT_TOL):
        """``integral of f(z) over [c, c_high]`` by adaptive Simpson, split at breakpoints."""
        c = float(self.dist._check(c))
        pts = self.breakpoints()
        pts = np.concatenate([[c], pts[pts > c]])
        fn = lambda z: float(self._rate(min(z, self.c_high)))
        share = tol / max(1, len(pts) - 1)
        return sum(integrate_sqrt_substituted(fn, a, b, tol=share)
                   for a, b in zip(pts[:-1], pts[1:]))

    def payment(self, c, tol=PAYMENT_TOL):
        """Payment rate ``h(c) = c f(c) + integral of f over [c, c_high]``."""
        cv = float(self.dist._check(c))
        return cv * float(self._rate(cv)) + self.tail_integral(cv, tol)

    def tails_on_grid(self, cs, nodes=32):
        """Vectorised tail integrals for many costs at once."""
        cs = self.dist._check(np.atleast_1d(cs))
        pts = np.unique(np.concatenate([cs, self.breakpoints()]))
        tails = _tails_from_cells(self._rate, pts, self.c_low, self.c_high, nodes)
        return tails[np.searchsorted(pts, cs)]

    def payments_on_grid(self, cs, nodes=32):
        cs = self.dist._check(np.atleast_1d(cs))
        return cs * self._rate(cs) + self.tails_on_grid(cs, nodes)

    def to_price_schedule(self, c):
        """Map ``(f, h)`` at ``c`` to a per-update price and interarrival time."""
        f = float(self.rate(c))
        if f <= 0.0:
            return NO_TRADE
        return PriceQuote(price=self.payment(c) / f, interarrival=1.0 / f)


class NaiveMechanism:
    """Treats reports as true costs: pays the report per update at the
    full-information interarrival time. Not incentive compatible."""

    def __init__(self, dist: CostDistribution, aoi: PowerCost, f_max: float = DEFAULT_FMAX):
        if not isinstance(aoi, PowerCost):
            raise ConfigError("the naive mechanism is defined for power AoI costs")
        self.dist = dist
        self.aoi = aoi
        self.f_max = float(f_max)

    @property
    def c_low(self):
        return self.dist.c_low

    @property
    def c_high(self):
        return self.dist.c_high

    def _rate(self, c):
        return np.minimum(self.f_max, self.aoi.rate_for_virtual_cost(np.asarray(c, dtype=float)))

    def rate(self, c):
        out = self._rate(self.dist._check(c))
        return float(out) if np.ndim(c) == 0 else out

    def interarrival(self, c):
        a = self.aoi.alpha
        return ((1.0 + 1.0 / a) * np.asarray(c, dtype=float)) ** (1.0 / (1.0 + a))

    def payment(self, c):
        cc = self.dist._check(c)
        out = cc * self._rate(cc)
        return float(out) if np.ndim(c) == 0 else out

    def payments_on_grid(self, cs, nodes=None):
        return self.payment(np.atleast_1d(cs))

    def best_misreport(self, c, grid=400):
        """Report in a grid over the support that maximises the source's payoff."""
        reports = np.linspace(self.c_low, self.c_high, grid)
        payoff = (reports - c) * self._rate(reports)
        return float(reports[int(np.argmax(payoff))])

    def destination_cost(self, report=None):
        """Destination cost rate when the source reports ``report`` (default ``c_high``)."""
        c = self.c_high if report is None else float(report)
        a = self.aoi.alpha
        return (c * (1.0 + 1.0 / a)) ** (a / (1.0 + a))


def naive_counterpart(dist, aoi, grid=400):
    """Naive mechanism, the source's best report, and the destination's cost under it."""
    mech = NaiveMechanism(dist, aoi)
    mid = 0.5 * (dist.c_low + dist.c_high)
    best = mech.best_misreport(mid, grid)
    return mech, best, mech.destination_cost(best)
