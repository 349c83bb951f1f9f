"""Quantized mechanism: rates evaluated at cell midpoints, Riemann-sum payments.

Because the quantized rate is piecewise constant, the payment integral is
a finite sum and is exact, so the quantized mechanism keeps IC and IR.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DomainError, ResourceError
from .mech_multi import MultiSourceMechanism, SourceProfile, _allocation
from .mech_single import SingleSourceMechanism

MAX_GRID = 10_000_000
CHUNK_ELEMENTS = 1 << 22


class Quantizer:
    """Uniform cells of width ``delta`` aligned at ``anchor`` (default ``c_low``).

    Cells are intersected with the support; the top cost ``c_high`` belongs
    to the last cell, and midpoints that fall outside the support are
    clamped into it.
    """

    def __init__(self, delta, c_low, c_high, anchor=None):
        if not (delta > 0 and math.isfinite(delta)):
            raise ConfigError(f"quantization step must be positive, got {delta}")
        self.delta = float(delta)
        self.c_low, self.c_high = float(c_low), float(c_high)
        self.anchor = self.c_low if anchor is None else float(anchor)
        k_min = math.floor((self.c_low - self.anchor) / self.delta + 1e-9)
        k_max = math.ceil((self.c_high - self.anchor) / self.delta - 1e-9) - 1
        k_max = max(k_max, k_min)
        n_cells = k_max - k_min + 1
        if n_cells > MAX_GRID:
            raise ResourceError(f"{n_cells} quantization cells exceed the limit of {MAX_GRID}")
        self.k_min = k_min
        k = np.arange(k_min, k_max + 1)
        edges = self.anchor + self.delta * np.arange(k_min, k_max + 2)
        edges[0], edges[-1] = self.c_low, self.c_high
        self.edges = np.clip(edges, self.c_low, self.c_high)
        self.mids = np.clip(self.anchor + self.delta * (k + 0.5), self.c_low, self.c_high)

    def __len__(self):
        return len(self.mids)

    def __repr__(self):
        return f"Quantizer(delta={self.delta}, support=[{self.c_low}, {self.c_high}], cells={len(self)})"

    @property
    def widths(self):
        return np.diff(self.edges)

    def cell_index(self, c):
        c = np.asarray(c, dtype=float)
        k = np.floor((c - self.anchor) / self.delta).astype(np.int64) - self.k_min
        # the floor can land one cell off at exact edges after rounding
        k = np.clip(k, 0, len(self) - 1)
        k = np.where((k + 1 < len(self)) & (c >= self.edges[np.minimum(k + 1, len(self))]), k + 1, k)
        k = np.where((k > 0) & (c < self.edges[k]), k - 1, k)
        return k

    def __call__(self, c):
        out = self.mids[self.cell_index(c)]
        return float(out) if np.ndim(c) == 0 else out


def quantize_report(delta_q, c, support, anchor=None):
    """Midpoint of the quantization cell containing ``c``."""
    lo, hi = support
    if np.any(np.asarray(c) < lo) or np.any(np.asarray(c) > hi):
        raise DomainError(f"cost {c!r} outside support [{lo}, {hi}]")
    return Quantizer(delta_q, lo, hi, anchor)(c)


def _cell_payments(edges, f):
    """Payment per cell: ``hi_k f_k + sum_{j>k} width_j f_j`` along the last axis."""
    widths = np.diff(edges)
    suffix = np.cumsum((widths * f)[..., ::-1], axis=-1)[..., ::-1]
    above = np.concatenate([suffix[..., 1:], np.zeros(f.shape[:-1] + (1,))], axis=-1)
    return edges[1:] * f + above, above


class QuantizedSingleMechanism:
    def __init__(self, base: SingleSourceMechanism, delta_q, anchor=None):
        self.base = base
        self.dist = base.dist
        self.aoi = base.aoi
        self.f_max = base.f_max
        self.quantizer = Quantizer(delta_q, base.c_low, base.c_high, anchor)
        self.cell_rates = base._rate(self.quantizer.mids)
        self.cell_payments, self._above = _cell_payments(self.quantizer.edges, self.cell_rates)

    def __repr__(self):
        return f"QuantizedSingleMechanism({self.base!r}, {self.quantizer!r})"

    @property
    def delta_q(self):
        return self.quantizer.delta

    @property
    def c_low(self):
        return self.base.c_low

    @property
    def c_high(self):
        return self.base.c_high

    def rate(self, c):
        cc = self.dist._check(c)
        out = self.cell_rates[self.quantizer.cell_index(cc)]
        return float(out) if np.ndim(c) == 0 else out

    def tails_on_grid(self, cs, nodes=None):
        cs = self.dist._check(np.atleast_1d(cs))
        k = self.quantizer.cell_index(cs)
        return (self.quantizer.edges[k + 1] - cs) * self.cell_rates[k] + self._above[k]

    def payment(self, c):
        cc = self.dist._check(c)
        k = self.quantizer.cell_index(cc)
        out = cc * self.cell_rates[k] + self.tails_on_grid(np.atleast_1d(cc)).reshape(np.shape(cc))
        return float(out) if np.ndim(c) == 0 else out

    def payments_on_grid(self, cs, nodes=None):
        cs = np.atleast_1d(cs)
        return cs * self.rate(cs) + self.tails_on_grid(cs)

    def breakpoints(self):
        return self.quantizer.edges.copy()

    def cell_table(self):
        """Rows ``(cell_lo, cell_hi, midpoint, f_q, h_q)``."""
        q = self.quantizer
        return np.column_stack([q.edges[:-1], q.edges[1:], q.mids, self.cell_rates, self.cell_payments])


class QuantizedMultiMechanism:
    def __init__(self, base: MultiSourceMechanism, delta_q, anchor=None):
        self.base = base
        self.profile = base.profile
        self.aoi = base.aoi
        self.quantizers = [Quantizer(delta_q, d.c_low, d.c_high, anchor) for d in self.profile.dists]
        total = sum(len(q) for q in self.quantizers)
        if total > MAX_GRID:
            raise ResourceError(f"{total} quantization cells exceed the limit of {MAX_GRID}")

    def __repr__(self):
        return f"QuantizedMultiMechanism({self.base!r}, delta={self.delta_q})"

    @property
    def delta_q(self):
        return self.quantizers[0].delta

    @property
    def n_sources(self):
        return len(self.profile)

    def quantize(self, costs):
        C = np.asarray(costs, dtype=float)
        return np.stack([q(C[..., i]) for i, q in enumerate(self.quantizers)], axis=-1)

    def rates_batch(self, costs):
        return self.base.rates_batch(self.quantize(np.atleast_2d(costs)))

    def _cell_rate_table(self, i, Q):
        """Rate of source ``i`` at each of its cell midpoints, others fixed at ``Q``."""
        mids = self.quantizers[i].mids
        n, K = Q.shape[0], len(mids)
        rows = np.repeat(Q[:, None, :], K, axis=1)
        rows[:, :, i] = mids
        f = self.base.rates_batch(rows.reshape(-1, self.n_sources))[0][:, i]
        return f.reshape(n, K)

    def tails_i(self, i, costs, zq, nodes=None):
        """Exact tails of the piecewise-constant rate of source ``i``; same contract as the base."""
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        zq = np.atleast_2d(np.asarray(zq, dtype=float))
        q = self.quantizers[i]
        step = max(1, CHUNK_ELEMENTS // (len(q) * self.n_sources))
        out = np.empty(zq.shape)
        for s in range(0, C.shape[0], step):
            Q = self.quantize(C[s:s + step])
            table = self._cell_rate_table(i, Q)
            _, above = _cell_payments(q.edges, table)
            z = zq[s:s + step]
            k = q.cell_index(z)
            fk = np.take_along_axis(table, k, axis=1)
            ak = np.take_along_axis(above, k, axis=1)
            out[s:s + step] = (q.edges[k + 1] - z) * fk + ak
        return out

    def payments_batch(self, costs, sources=None, nodes=None):
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        f = self.rates_batch(C)[0]
        H = np.full(C.shape, np.nan)
        for i in (range(self.n_sources) if sources is None else sources):
            H[:, i] = C[:, i] * f[:, i] + self.tails_i(i, C, C[:, i:i + 1])[:, 0]
        return H

    def payments(self, costs):
        C = self.profile.check_costs(costs)
        return self.payments_batch(C[None, :])[0]

    def allocate(self, costs):
        C = self.profile.check_costs(costs)
        f, F, _ = self.rates_batch(C[None, :])
        return _allocation(f[0], F[0], self.payments_batch(C[None, :])[0])

    def payment_rate_i(self, costs, i):
        C = self.profile.check_costs(costs)
        return float(self.payments_batch(C[None, :], sources=[i])[0, i])


def build_quantized(base, delta_q, anchor=None):
    """Quantized version of a single- or multi-source optimal mechanism."""
    if isinstance(base, SingleSourceMechanism):
        return QuantizedSingleMechanism(base, delta_q, anchor)
    if isinstance(base, MultiSourceMechanism):
        return QuantizedMultiMechanism(base, delta_q, anchor)
    raise ConfigError(f"cannot quantize {type(base).__name__}")


def loss_bound(sources, delta_q):
    """``sum_i L_i * f_max_i * delta_q``; ``sources`` is a mechanism, profile or ``(dist, f_max)`` pairs."""
    if isinstance(sources, (SingleSourceMechanism, QuantizedSingleMechanism)):
        pairs = [(sources.dist, sources.f_max)]
    elif isinstance(sources, (MultiSourceMechanism, QuantizedMultiMechanism)):
        pairs = [(s.dist, s.f_max) for s in sources.profile]
    elif isinstance(sources, SourceProfile):
        pairs = [(s.dist, s.f_max) for s in sources]
    else:
        pairs = list(sources)
    if delta_q == 0:
        return 0.0
    return float(sum(d.lipschitz_bound() * fm for d, fm in pairs) * delta_q)
