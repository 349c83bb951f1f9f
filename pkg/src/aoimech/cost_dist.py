"""Private-cost priors, virtual costs, Lipschitz bounds and ironing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError
from .numerics import bisect_nondecreasing_vec

IRON_QUANTILES = 4096
PDF_FLOOR = 1e-12


def _as_out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class CostDistribution:
    """Prior over a source's per-update sampling cost on ``[c_low, c_high]``.

    Subclasses provide ``_cdf``, ``_pdf``, ``_pdf_prime`` and ``_quantile``
    on arrays without domain checks; public methods validate inputs.
    """

    kind = "abstract"
    c_low: float
    c_high: float

    @staticmethod
    def from_dict(spec):
        kind = spec.get("kind")
        if kind == "uniform":
            return Uniform(float(spec["c_low"]), float(spec["c_high"]))
        if kind == "trunc_exp":
            return TruncExp(float(spec["mu"]), float(spec["c_high"]))
        if kind == "tabulated":
            return Tabulated(spec["cdf_points"])
        raise ConfigError(f"unknown cost distribution kind {kind!r}")

    def _check(self, c):
        arr = np.asarray(c, dtype=float)
        slack = 1e-12 * max(1.0, abs(self.c_high))
        if np.any(np.isnan(arr)) or np.any(arr < self.c_low - slack) or np.any(arr > self.c_high + slack):
            raise DomainError(f"cost {c!r} outside support [{self.c_low}, {self.c_high}]")
        return np.clip(arr, self.c_low, self.c_high)

    @property
    def width(self):
        return self.c_high - self.c_low

    def cdf(self, c):
        return _as_out(self._cdf(self._check(c)), c)

    def pdf(self, c):
        return _as_out(self._pdf(self._check(c)), c)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > 1):
            raise DomainError("quantile level must lie in [0, 1]")
        return _as_out(self._quantile(u), u)

    def _phi(self, c):
        gam = self._pdf(c)
        if np.any(gam <= 0):
            raise DomainError("density vanishes inside the support; virtual cost undefined")
        return c + self._cdf(c) / gam

    def virtual_cost(self, c):
        """``c + Gamma(c) / gamma(c)``."""
        return _as_out(self._phi(self._check(c)), c)

    def cumulative_virtual_cost(self, c):
        """``Phi(c) = integral of phi * gamma from c_low to c``.

        Since ``phi * gamma = d/dc [c * Gamma(c)]`` this equals ``c * Gamma(c)``.
        """
        cc = self._check(c)
        return _as_out(cc * self._cdf(cc), c)

    def lipschitz_bound(self):
        """Max of ``2 - Gamma * gamma' / gamma**2`` over the support."""
        raise NotImplementedError

    @property
    def lipschitz_is_approximate(self):
        return False

    def kinks(self):
        """Interior costs where the density is not smooth (quadrature breakpoints)."""
        return np.empty(0)

    def mean(self):
        from .numerics import gl_integrate
        return gl_integrate(lambda u: self._quantile(u), 0.0, 1.0, 400)

    @cached_property
    def ironed(self):
        return iron(self)

    def ironed_virtual_cost(self, c):
        return self.ironed(c)

    def invert_ironed(self, v):
        """Smallest cost whose ironed virtual cost reaches ``v`` (clipped to the support)."""
        return bisect_nondecreasing_vec(lambda z: self.ironed._eval(z), v,
                                        self.c_low, self.c_high)


class Uniform(CostDistribution):
    kind = "uniform"

    def __init__(self, c_low, c_high):
        if not (0 <= c_low < c_high < math.inf):
            raise ConfigError(f"uniform support needs 0 <= c_low < c_high, got [{c_low}, {c_high}]")
        self.c_low, self.c_high = float(c_low), float(c_high)

    def __repr__(self):
        return f"Uniform({self.c_low}, {self.c_high})"

    def to_dict(self):
        return {"kind": "uniform", "c_low": self.c_low, "c_high": self.c_high}

    def _cdf(self, c):
        return (c - self.c_low) / self.width

    def _pdf(self, c):
        return np.full(np.shape(c), 1.0 / self.width)

    def _pdf_prime(self, c):
        return np.zeros(np.shape(c))

    def _quantile(self, u):
        return self.c_low + u * self.width

    def _phi(self, c):
        return 2.0 * c - self.c_low

    def lipschitz_bound(self):
        return 2.0

    def invert_ironed(self, v):
        return np.clip(0.5 * (np.asarray(v, dtype=float) + self.c_low), self.c_low, self.c_high)

    def mean(self):
        return 0.5 * (self.c_low + self.c_high)


class TruncExp(CostDistribution):
    """Exponential with rate ``mu`` truncated to ``[0, c_high]``."""

    kind = "trunc_exp"

    def __init__(self, mu, c_high):
        if not (mu > 0 and 0 < c_high < math.inf):
            raise ConfigError(f"truncated exponential needs mu > 0 and c_high > 0, got mu={mu}, c_high={c_high}")
        self.mu = float(mu)
        self.c_low = 0.0
        self.c_high = float(c_high)
        self._mass = -math.expm1(-self.mu * self.c_high)

    def __repr__(self):
        return f"TruncExp(mu={self.mu}, c_high={self.c_high})"

    def to_dict(self):
        return {"kind": "trunc_exp", "mu": self.mu, "c_high": self.c_high}

    def _cdf(self, c):
        return -np.expm1(-self.mu * c) / self._mass

    def _pdf(self, c):
        return self.mu * np.exp(-self.mu * c) / self._mass

    def _pdf_prime(self, c):
        return -self.mu * self._pdf(c)

    def _quantile(self, u):
        with np.errstate(divide="ignore"):
            c = -np.log1p(-u * self._mass) / self.mu
        return np.minimum(c, self.c_high)

    def _phi(self, c):
        return c + np.expm1(self.mu * c) / self.mu

    def lipschitz_bound(self):
        return 1.0 + math.exp(self.mu * self.c_high)

    def mean(self):
        m, b = self.mu, self.c_high
        return 1.0 / m - b * math.exp(-m * b) / self._mass


class Tabulated(CostDistribution):
    """Prior given by ``(cost, cdf)`` knots, interpolated by a monotone cubic.

    The CDF is rescaled to run from 0 to 1; the density is floored at
    ``PDF_FLOOR`` so that the virtual cost stays finite.
    """

    kind = "tabulated"

    def __init__(self, cdf_points):
        pts = np.asarray(cdf_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ConfigError("tabulated distribution needs >= 3 (cost, cdf) pairs")
        c, q = pts[:, 0], pts[:, 1]
        if np.any(np.diff(c) <= 0):
            raise ConfigError("tabulated costs must be strictly increasing")
        if np.any(np.diff(q) < 0) or q[-1] <= q[0]:
            raise ConfigError("tabulated CDF values must be non-decreasing and not constant")
        if c[0] < 0:
            raise ConfigError("costs must be non-negative")
        q = (q - q[0]) / (q[-1] - q[0])
        self.knots = c.copy()
        self.levels = q
        self.c_low, self.c_high = float(c[0]), float(c[-1])
        self._F = PchipInterpolator(c, q, extrapolate=False)
        self._f = self._F.derivative()
        self._fp = self._F.derivative(2)
        grid = np.linspace(self.c_low, self.c_high, 16385)
        cdf = np.maximum.accumulate(np.clip(self._F(grid), 0.0, 1.0))
        cdf[0], cdf[-1] = 0.0, 1.0
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._inv_u, self._inv_c = cdf[keep], grid[keep]

    def __repr__(self):
        return f"Tabulated({len(self.knots)} knots on [{self.c_low}, {self.c_high}])"

    def to_dict(self):
        return {"kind": "tabulated",
                "cdf_points": [[float(a), float(b)] for a, b in zip(self.knots, self.levels)]}

    def _cdf(self, c):
        return np.clip(self._F(c), 0.0, 1.0)

    def _pdf(self, c):
        return np.maximum(self._f(c), PDF_FLOOR)

    def _pdf_prime(self, c):
        return self._fp(c)

    def _quantile(self, u):
        return np.interp(u, self._inv_u, self._inv_c)

    def lipschitz_bound(self, n=20001):
        grid = np.linspace(self.c_low, self.c_high, n)
        slopes = np.diff(self._phi(grid)) / np.diff(grid)
        return float(np.max(np.abs(slopes)))

    @property
    def lipschitz_is_approximate(self):
        return True

    def kinks(self):
        return self.knots[1:-1].copy()


@dataclass(frozen=True)
class IronedVirtualCost:
    """Non-decreasing virtual cost obtained from the convex hull of ``Phi``.

    ``intervals`` holds ``(a_k, b_k)`` cost intervals with constant values
    ``values[k]``; outside them the raw virtual cost applies, clipped between
    neighbouring interval values so that rounding at the snapped endpoints
    cannot break monotonicity.
    """

    base: CostDistribution
    intervals: tuple = ()
    values: tuple = ()

    def _eval(self, c):
        c = np.asarray(c, dtype=float)
        phi = self.base._phi(c)
        if not self.intervals:
            return phi
        out = phi.copy()
        lo_v = -np.inf
        edges = [self.base.c_low] + [x for ab in self.intervals for x in ab] + [self.base.c_high]
        for k, (a, b) in enumerate(self.intervals):
            v = self.values[k]
            # stretch below interval k, above interval k-1
            left = edges[2 * k]
            mask = ((c >= left) if k == 0 else (c > left)) & (c < a)
            out = np.where(mask, np.clip(phi, lo_v, v), out)
            out = np.where((c >= a) & (c <= b), v, out)
            lo_v = v
        last = self.intervals[-1][1]
        out = np.where(c > last, np.maximum(phi, lo_v), out)
        return out

    def __call__(self, c):
        cc = self.base._check(c)
        return _as_out(self._eval(cc), c)

    @property
    def is_trivial(self):
        return not self.intervals


def iron(dist, n=IRON_QUANTILES, tol=1e-10):
    """Iron ``dist``'s virtual cost via the lower convex hull in quantile space.

    With ``q = Gamma(c)`` the cumulative virtual cost is ``q * c(q)``; the
    slope of its lower convex envelope is the ironed virtual cost. Hull edges
    that skip grid points with a gap above ``tol`` become ironed intervals.
    """
    q = np.linspace(0.0, 1.0, n + 1)
    c = dist._quantile(q)
    c[0], c[-1] = dist.c_low, dist.c_high
    H = q * c
    hull = _lower_hull(q, H)
    scale = tol * max(1.0, float(np.max(np.abs(H))))
    intervals, values = [], []
    for ka, kb in zip(hull[:-1], hull[1:]):
        if kb - ka < 2:
            continue
        slope = (H[kb] - H[ka]) / (q[kb] - q[ka])
        chord = H[ka] + slope * (q[ka + 1:kb] - q[ka])
        if np.max(H[ka + 1:kb] - chord) <= scale:
            continue
        intervals.append((float(c[ka]), float(c[kb])))
        values.append(float(slope))
    return IronedVirtualCost(dist, tuple(intervals), tuple(float(v) for v in values))


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull = []
    for k in range(len(x)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def virtual_cost(dist, c):
    return dist.virtual_cost(c)


def cumulative_virtual_cost(dist, c):
    return dist.cumulative_virtual_cost(c)


def lipschitz_bound(dist):
    return dist.lipschitz_bound()
