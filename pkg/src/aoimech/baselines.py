"""Reference mechanisms: a second-price style benchmark and complete-information pricing."""
from __future__ import annotations

import numpy as np

from . import kernels
from .mech_multi import SourceProfile, _allocation


class BenchmarkMechanism:
    """Buys only from the lowest reported cost, at the second-lowest cost per update.

    The winner's rate minimises ``f G(1/f) + f c_(2)`` over ``[0, f_max]``,
    i.e. solves ``M(1/f) = c_(2)``. With one source, ``c_(2)`` is the top of
    its support. Ties go to the lowest index.
    """

    name = "benchmark"

    def __init__(self, profile, aoi):
        self.profile = profile if isinstance(profile, SourceProfile) else SourceProfile(profile)
        self.aoi = aoi

    def __repr__(self):
        return f"BenchmarkMechanism({self.profile!r}, {self.aoi!r})"

    @property
    def n_sources(self):
        return len(self.profile)

    def _winner_and_price(self, C):
        n, I = C.shape
        winner = np.argmin(C, axis=1)
        if I == 1:
            second = np.full(n, self.profile.c_high[0])
        else:
            second = np.partition(C, 1, axis=1)[:, 1]
        return winner, second

    def rates_batch(self, costs):
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        n, I = C.shape
        winner, second = self._winner_and_price(C)
        caps = self.profile.fmax[winner]
        f_win = np.minimum(caps, self.aoi.rate_for_virtual_cost(second))
        f = np.zeros((n, I))
        f[np.arange(n), winner] = f_win
        return f, f_win, winner

    def payments_batch(self, costs, sources=None, nodes=None):
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        f, _, winner = self.rates_batch(C)
        _, second = self._winner_and_price(C)
        return f * second[:, None]

    def allocate(self, costs):
        C = self.profile.check_costs(costs)[None, :]
        f, F, _ = self.rates_batch(C)
        return _allocation(f[0], F[0], self.payments_batch(C)[0])


class CompleteInformationPricing:
    """Lower bound: the destination sees true costs and reimburses them exactly."""

    name = "complete"

    def __init__(self, profile, aoi):
        self.profile = profile if isinstance(profile, SourceProfile) else SourceProfile(profile)
        self.aoi = aoi

    def __repr__(self):
        return f"CompleteInformationPricing({self.profile!r}, {self.aoi!r})"

    @property
    def n_sources(self):
        return len(self.profile)

    def rates_batch(self, costs):
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        return kernels.waterfill(C, self.profile.fmax, self.aoi)

    def payments_batch(self, costs, sources=None, nodes=None):
        C = np.atleast_2d(np.asarray(costs, dtype=float))
        return C * self.rates_batch(C)[0]

    def allocate(self, costs):
        C = self.profile.check_costs(costs)[None, :]
        f, F, _ = self.rates_batch(C)
        return _allocation(f[0], F[0], self.payments_batch(C)[0])


def benchmark_mechanism(profile, costs, aoi):
    """Allocation and payments of the benchmark for one reported profile."""
    return BenchmarkMechanism(profile, aoi).allocate(costs)


def complete_info_pricing(profile, costs, aoi):
    """Allocation and payments under complete information for one profile."""
    return CompleteInformationPricing(profile, aoi).allocate(costs)
