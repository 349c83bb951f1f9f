"""Optimal multi-source mechanism: aggregate rate, water-filling split, payments.

Source ``i``'s rate depends on its own report only through its ironed
virtual cost ``v``, and as a function of ``v`` it is either constant or
``rate(v) - S`` for the cap sum ``S`` of cheaper sources. The change points
in ``v`` are known in closed form, so payment integrals are split exactly
there and only the smooth non-constant pieces need quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .aoi_cost import AoiCostModel
from .cost_dist import CostDistribution
from .errors import ConfigError, InfeasibleError
from .mech_single import DEFAULT_FMAX
from .numerics import gl_nodes

PAYMENT_NODES = 256
CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class Source:
    dist: CostDistribution
    f_max: float = DEFAULT_FMAX

    def __post_init__(self):
        if not self.f_max >= 0:
            raise ConfigError(f"f_max must be non-negative, got {self.f_max}")


class SourceProfile:
    """Ordered collection of sources; the position in the list is the index."""

    def __init__(self, sources):
        sources = tuple(s if isinstance(s, Source) else Source(*s) for s in sources)
        if not sources:
            raise ConfigError("a profile needs at least one source")
        self.sources = sources
        self.fmax = np.array([s.f_max for s in sources], dtype=float)

    def __len__(self):
        return len(self.sources)

    def __getitem__(self, i):
        return self.sources[i]

    def __repr__(self):
        return f"SourceProfile({list(self.sources)!r})"

    @property
    def dists(self):
        return [s.dist for s in self.sources]

    @property
    def c_low(self):
        return np.array([d.c_low for d in self.dists])

    @property
    def c_high(self):
        return np.array([d.c_high for d in self.dists])

    def check_costs(self, costs):
        """Validate a ``(..., I)`` array of costs against each source's support."""
        C = np.asarray(costs, dtype=float)
        if C.shape[-1] != len(self):
            raise ConfigError(f"expected {len(self)} costs per profile, got {C.shape[-1]}")
        cols = [self.sources[i].dist._check(C[..., i]) for i in range(len(self))]
        return np.stack(cols, axis=-1)

    def ironed_phi(self, costs):
        C = np.asarray(costs, dtype=float)
        cols = [d.ironed._eval(C[..., i]) for i, d in enumerate(self.dists)]
        return np.stack(cols, axis=-1)

    def raw_phi(self, costs):
        C = np.asarray(costs, dtype=float)
        cols = [d._phi(C[..., i]) for i, d in enumerate(self.dists)]
        return np.stack(cols, axis=-1)


@dataclass
class MultiAllocation:
    rates: np.ndarray
    f_agg: float
    probabilities: np.ndarray
    interarrival: float
    payments: np.ndarray | None = field(default=None)

    @property
    def no_trade(self):
        return self.f_agg <= 0.0

    def prices(self):
        """Per-update price for each source; zero where a source is never scheduled."""
        if self.payments is None:
            raise ValueError("payments were not computed for this allocation")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.rates > 0, self.payments / np.where(self.rates > 0, self.rates, 1.0), 0.0)

    def to_dict(self):
        out = {"rates": self.rates.tolist(), "f_agg": self.f_agg,
               "probabilities": self.probabilities.tolist(), "interarrival": self.interarrival}
        if self.payments is not None:
            out["payments"] = self.payments.tolist()
            out["prices"] = self.prices().tolist()
        return out


def _allocation(rates, f_agg, payments=None):
    rates = np.asarray(rates, dtype=float)
    f_agg = float(f_agg)
    if f_agg > 0:
        probs = rates / rates.sum()
        x = 1.0 / f_agg
    else:
        probs, x = np.zeros_like(rates), math.inf
    return MultiAllocation(rates, f_agg, probs, x, payments)


def aggregate_virtual_cost(phi, fmax, F, rtol=1e-12):
    """Minimal total virtual cost of buying aggregate rate ``F``, and its subgradient.

    Returns ``(value, (lo, hi))``; ``lo == hi`` strictly inside a segment.
    """
    phi = np.asarray(phi, dtype=float)
    fmax = np.asarray(fmax, dtype=float)
    order = np.argsort(phi, kind="stable")
    ps, caps = phi[order], fmax[order]
    B = np.concatenate([[0.0], np.cumsum(caps)])
    F = float(F)
    if F < 0 or F > B[-1] * (1.0 + rtol):
        raise InfeasibleError(f"aggregate rate {F} outside [0, {B[-1]}]")
    fill = np.clip(F - B[:-1], 0.0, caps)
    value = float(np.sum(ps[fill > 0] * fill[fill > 0]))
    I = len(ps)
    for k in range(I + 1):
        if math.isfinite(B[k]) and abs(F - B[k]) <= rtol * max(1.0, B[k]):
            lo = ps[k - 1] if k > 0 else -math.inf
            hi = ps[k] if k < I else math.inf
            return value, (float(lo), float(hi))
    k = int(np.searchsorted(B, F, side="right")) - 1
    return value, (float(ps[k]), float(ps[k]))


def waterfill_given_rate(phi, fmax, f_agg):
    """Split ``f_agg`` cheapest first (ties by index)."""
    phi = np.asarray(phi, dtype=float)
    fmax = np.asarray(fmax, dtype=float)
    order = np.argsort(phi, kind="stable")
    caps = fmax[order]
    B = np.concatenate([[0.0], np.cumsum(caps)])
    f = np.empty_like(phi)
    f[order] = np.clip(float(f_agg) - B[:-1], 0.0, caps)
    return f


class MultiSourceMechanism:
    """Optimal mechanism for ``I`` independent sources sharing one destination."""

    def __init__(self, profile: SourceProfile, aoi: AoiCostModel):
        self.profile = profile if isinstance(profile, SourceProfile) else SourceProfile(profile)
        self.aoi = aoi

    def __repr__(self):
        return f"MultiSourceMechanism({self.profile!r}, {self.aoi!r})"

    @property
    def n_sources(self):
        return len(self.profile)

    def rates_batch(self, costs):
        """Rates ``(n, I)``, aggregate ``(n,)`` and marginal index for profiles ``(n, I)``."""
        C = np.atleast_2d(costs)
        return kernels.waterfill(self.profile.ironed_phi(C), self.profile.fmax, self.aoi)

    def aggregate_virtual_cost(self, costs, F):
        C = self.profile.check_costs(costs)
        return aggregate_virtual_cost(self.profile.ironed_phi(C), self.profile.fmax, F)

    def aggregate_rate(self, costs):
        C = self.profile.check_costs(costs)
        return float(self.rates_batch(C[None, :])[1][0])

    def allocate(self, costs, f_agg=None, with_payments=False):
        C = self.profile.check_costs(costs)
        if f_agg is None:
            f_agg = self.aggregate_rate(C)
        f = waterfill_given_rate(self.profile.ironed_phi(C), self.profile.fmax, f_agg)
        pay = self.payments(C) if with_payments else None
        return _allocation(f, f_agg, pay)

    def payment_rate_i(self, costs, i, nodes=PAYMENT_NODES):
        """``h_i = c_i f_i(c) + integral of f_i(z, c_-i) over [c_i, c_high_i]``."""
        C = self.profile.check_costs(costs)
        return float(self.payments_batch(C[None, :], sources=[i], nodes=nodes)[0, i])

    def payments(self, costs, nodes=PAYMENT_NODES):
        C = self.profile.check_costs(costs)
        return self.payments_batch(C[None, :], nodes=nodes)[0]

    def payments_batch(self, costs, sources=None, nodes=PAYMENT_NODES):
        """Payment rates for profiles ``(n, I)``; columns outside ``sources`` are NaN."""
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        f = self.rates_batch(C)[0]
        H = np.full(C.shape, np.nan)
        for i in (range(self.n_sources) if sources is None else sources):
            tails = self.tails_i(i, C, C[:, i:i + 1], nodes)[:, 0]
            H[:, i] = C[:, i] * f[:, i] + tails
        return H

    def tails_i(self, i, costs, zq, nodes=PAYMENT_NODES):
        """``integral of f_i(z, c_-i) over [zq, c_high_i]`` for each row and query point.

        ``costs`` is ``(n, I)`` (column ``i`` ignored); ``zq`` is ``(n, G)``.
        """
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        zq = np.atleast_2d(np.asarray(zq, dtype=float))
        n, G = zq.shape
        per_row = (G + 3 * self.n_sources + 4) * (nodes + self.n_sources)
        step = max(1, CHUNK_ELEMENTS // per_row)
        out = np.empty((n, G))
        for s in range(0, n, step):
            out[s:s + step] = self._tails_chunk(i, C[s:s + step], zq[s:s + step], nodes)
        return out

    def _v_breakpoints(self, i, W, caps_others):
        """Ironed-virtual-cost values of source ``i`` where its rate changes regime."""
        n = W.shape[0]
        mi = self.profile.fmax[i]
        order = np.argsort(W, axis=1, kind="stable")
        S = np.concatenate([np.zeros((n, 1)), np.cumsum(caps_others[order], axis=1)], axis=1)
        upper = self.aoi.reduction_at_rate(S[:, 1:])
        lower = self.aoi.reduction_at_rate(S + mi)
        return np.concatenate([W, upper, lower], axis=1)

    def _tails_chunk(self, i, C, zq, nodes):
        prof = self.profile
        dist = prof.sources[i].dist
        lo, hi = dist.c_low, dist.c_high
        n, G = zq.shape
        others = [j for j in range(self.n_sources) if j != i]
        W = np.stack([prof.sources[j].dist.ironed._eval(C[:, j]) for j in others], axis=1) \
            if others else np.zeros((n, 0))
        vb = self._v_breakpoints(i, W, prof.fmax[others])
        finite = np.isfinite(vb)
        zb = np.full(vb.shape, hi)
        if finite.any():
            zb[finite] = dist.invert_ironed(vb[finite])
        fixed = [lo, hi, *dist.kinks()] + [x for ab in dist.ironed.intervals for x in ab]
        zfix = np.broadcast_to(np.array(fixed), (n, len(fixed)))
        pts = np.concatenate([np.clip(zq, lo, hi), np.clip(zb, lo, hi), zfix], axis=1)
        order = np.argsort(pts, axis=1, kind="stable")
        P = np.take_along_axis(pts, order, axis=1)
        K = P.shape[1]
        a, b = P[:, :-1], P[:, 1:]
        mid = 0.5 * (a + b)

        # regime at each cell midpoint
        phi_rows = np.empty((n, K - 1, self.n_sources))
        for col, j in enumerate(others):
            phi_rows[:, :, j] = W[:, col:col + 1]
        phi_rows[:, :, i] = dist.ironed._eval(mid)
        f, F, marg = kernels.waterfill(phi_rows.reshape(-1, self.n_sources), prof.fmax, self.aoi)
        fi = f[:, i].reshape(n, K - 1)
        cells = (b - a) * fi
        smooth = (marg.reshape(n, K - 1) == i) & (b > a)
        if smooth.any():
            S = (F.reshape(n, K - 1) - fi)[smooth]
            ua = np.sqrt(np.maximum(a[smooth] - lo, 0.0))
            ub = np.sqrt(np.maximum(b[smooth] - lo, 0.0))
            u, w = gl_nodes(ua, ub, nodes)
            z = np.minimum(lo + u * u, hi)
            r = self.aoi.rate_for_virtual_cost(dist.ironed._eval(z))
            vals = np.clip(r - S[:, None], 0.0, prof.fmax[i])
            cells[smooth] = np.sum(w * 2.0 * u * vals, axis=1)
        tails = np.concatenate([np.cumsum(cells[:, ::-1], axis=1)[:, ::-1], np.zeros((n, 1))], axis=1)
        # query points occupy the first G slots of pts
        inv = np.argsort(order, axis=1)
        return np.take_along_axis(tails, inv[:, :G], axis=1)


def aggregate_rate(profile, costs, aoi):
    return MultiSourceMechanism(profile, aoi).aggregate_rate(costs)


def allocate(profile, costs, f_agg, aoi=None):
    """Cheapest-first split of a given aggregate rate."""
    profile = profile if isinstance(profile, SourceProfile) else SourceProfile(profile)
    C = profile.check_costs(costs)
    f = waterfill_given_rate(profile.ironed_phi(C), profile.fmax, f_agg)
    return _allocation(f, f_agg)


def payment_rate_i(profile, costs, i, aoi, nodes=PAYMENT_NODES):
    return MultiSourceMechanism(profile, aoi).payment_rate_i(costs, i, nodes)
