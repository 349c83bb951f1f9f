"""Brute-force IC/IR certification and a discrete-event AoI simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigError
from .experiments import qmc_costs
from .mech_multi import MultiAllocation, MultiSourceMechanism, _allocation
from .mech_quantized import QuantizedSingleMechanism
from .mech_single import NaiveMechanism, SingleSourceMechanism

TRUE_GRID = 200
REPORT_GRID = 400
IC_TOL = 1e-6
CRN_DRAWS = 4096
SAWTOOTH_SAMPLES = 16


@dataclass
class SourceDeviation:
    source: int
    true_costs: np.ndarray
    best_deviation: np.ndarray
    max_gain: np.ndarray
    truthful_payoff: np.ndarray
    stderr: np.ndarray

    @property
    def worst(self):
        k = int(np.argmax(self.max_gain - 3.0 * self.stderr))
        return {"true_cost": float(self.true_costs[k]), "best_deviation": float(self.best_deviation[k]),
                "gain": float(self.max_gain[k]), "stderr": float(self.stderr[k])}


@dataclass
class DeviationReport:
    """Per-source deviation search results with IC and IR verdicts."""

    sources: list
    tol: float
    monte_carlo: bool
    ic: bool = field(init=False)
    ir: bool = field(init=False)

    def __post_init__(self):
        self.ic = all(bool(np.all(s.max_gain <= 3.0 * s.stderr + self.tol)) for s in self.sources)
        self.ir = all(bool(np.all(s.truthful_payoff >= -(3.0 * s.stderr + self.tol))) for s in self.sources)

    @property
    def max_gain(self):
        return max(float(np.max(s.max_gain)) for s in self.sources)

    def to_dict(self):
        return {"ic": self.ic, "ir": self.ir, "tol": self.tol, "monte_carlo": self.monte_carlo,
                "max_gain": self.max_gain,
                "sources": [{"source": s.source, **s.worst,
                             "min_truthful_payoff": float(np.min(s.truthful_payoff)),
                             "payoff_at_top": float(s.truthful_payoff[-1])} for s in self.sources]}


def _is_single(mech):
    return isinstance(mech, (SingleSourceMechanism, QuantizedSingleMechanism, NaiveMechanism)) \
        or not hasattr(mech, "profile")


def _grids(lo, hi, n_true, n_report):
    true = np.linspace(lo, hi, n_true)
    reports = np.union1d(np.linspace(lo, hi, n_report), true)
    return true, reports, np.searchsorted(reports, true)


def _search(true, reports, pos, h, f, monte_carlo):
    """Deviation search given payments ``h`` and rates ``f`` at the reports.

    ``h`` and ``f`` are ``(n, R)``: one row per draw of the other sources.
    """
    n = h.shape[0]
    best = np.empty(len(true))
    gain = np.empty(len(true))
    se = np.zeros(len(true))
    truthful = np.empty(len(true))
    hbar, fbar = h.mean(axis=0), f.mean(axis=0)
    for t, (c, k) in enumerate(zip(true, pos)):
        payoff = hbar - c * fbar
        mean = payoff - payoff[k]
        j = int(np.argmax(mean))
        best[t], gain[t] = reports[j], mean[j]
        if monte_carlo and n > 1:
            d = (h[:, j] - h[:, k]) - c * (f[:, j] - f[:, k])
            se[t] = float(np.std(d, ddof=1) / math.sqrt(n))
        truthful[t] = float(payoff[k])
    return best, gain, truthful, se


def _single_tables(mech, reports):
    f = np.asarray(mech.rate(reports), dtype=float)
    h = np.asarray(mech.payments_on_grid(reports), dtype=float)
    return h[None, :], f[None, :]


def _multi_tables(mech, i, reports, draws, seed, nodes):
    profile = mech.profile
    I = len(profile)
    C = qmc_costs(profile, draws, 1, seed)[0]
    n, R = C.shape[0], len(reports)
    rows = np.repeat(C[:, None, :], R, axis=1)
    rows[:, :, i] = reports
    flat = rows.reshape(-1, I)
    f = mech.rates_batch(flat)[0][:, i].reshape(n, R)
    if hasattr(mech, "tails_i"):
        zq = np.broadcast_to(reports, (n, R))
        h = reports * f + mech.tails_i(i, C, zq, nodes)
    else:
        h = mech.payments_batch(flat)[:, i].reshape(n, R)
    return h, f


def verify_ic(mech, n_true=TRUE_GRID, n_report=REPORT_GRID, tol=IC_TOL, draws=CRN_DRAWS,
              seed=0, sources=None, nodes=32):
    """Search report deviations on a grid and report the largest payoff gain.

    Single-source mechanisms need ``c_low``, ``c_high``, ``rate`` and
    ``payments_on_grid``. Multi-source ones average payoffs over ``draws``
    common quasi-random draws of the other sources' costs.
    """
    if _is_single(mech):
        true, reports, pos = _grids(mech.c_low, mech.c_high, n_true, n_report)
        h, f = _single_tables(mech, reports)
        res = _search(true, reports, pos, h, f, False)
        return DeviationReport([SourceDeviation(0, true, *res[:3], res[3])], tol, False)
    out = []
    for i in (range(len(mech.profile)) if sources is None else sources):
        d = mech.profile.dists[i]
        true, reports, pos = _grids(d.c_low, d.c_high, n_true, n_report)
        h, f = _multi_tables(mech, i, reports, draws, seed, nodes)
        best, gain, truthful, se = _search(true, reports, pos, h, f, True)
        out.append(SourceDeviation(i, true, best, gain, truthful, se))
    return DeviationReport(out, tol, True)


def verify_ir(mech, n_true=TRUE_GRID, tol=IC_TOL, draws=CRN_DRAWS, seed=0, sources=None, nodes=32):
    """Truthful payoffs on a grid; IR holds when none is below ``-tol``."""
    return verify_ic(mech, n_true, 2, tol, draws, seed, sources, nodes)


# simulation -------------------------------------------------------------------

@dataclass
class SimTrace:
    seed: int
    K: int
    interarrivals: np.ndarray
    selected: np.ndarray
    paid: np.ndarray
    costs: np.ndarray
    destination_rate: float
    source_payoff_rates: np.ndarray
    allocation: MultiAllocation
    interval_cost: float

    @property
    def update_times(self):
        return np.concatenate([[0.0], np.cumsum(self.interarrivals)])

    def sawtooth(self, per_interval=SAWTOOTH_SAMPLES, limit=None):
        """``(times, ages)`` sampled within each interval; age resets at every update."""
        x = self.interarrivals if limit is None else self.interarrivals[:limit]
        start = np.concatenate([[0.0], np.cumsum(x)[:-1]])
        frac = np.arange(per_interval + 1) / per_interval
        ages = x[:, None] * frac
        return start[:, None] + ages, ages

    def expected_rates(self):
        """Rate-form values the empirical averages should approach."""
        a = self.allocation
        prices = a.prices()
        x = a.interarrival
        return {"destination_rate": (self.interval_cost + float(np.dot(a.probabilities, prices))) / x,
                "source_payoff_rates": a.probabilities * (prices - self.costs) / x}

    def summary(self):
        return {"seed": self.seed, "K": self.K, "destination_rate": self.destination_rate,
                "source_payoff_rates": self.source_payoff_rates.tolist(),
                "interarrival": self.allocation.interarrival,
                "probabilities": self.allocation.probabilities.tolist()}


def _allocation_for(mech, costs):
    if isinstance(mech, (SingleSourceMechanism, QuantizedSingleMechanism)):
        c = float(np.atleast_1d(costs)[0])
        f = float(mech.rate(c))
        return _allocation([f], f, np.array([float(mech.payment(c))]))
    if isinstance(mech, MultiSourceMechanism):
        return mech.allocate(costs, with_payments=True)
    return mech.allocate(costs)


def simulate(mech, costs, K, seed, aoi=None):
    """Run ``K`` equally spaced updates, each from a source drawn i.i.d. from the split.

    Cost accounting uses the exact ``G(x)`` per interval; the sampled AoI
    trajectory is only for inspection.
    """
    if K <= 0:
        raise ConfigError("the number of updates K must be positive")
    aoi = aoi or mech.aoi
    costs = np.atleast_1d(np.asarray(costs, dtype=float))
    alloc = _allocation_for(mech, costs)
    if alloc.no_trade:
        raise ConfigError("the mechanism buys no updates at these costs; nothing to simulate")
    prices = alloc.prices()
    rng = np.random.default_rng(seed)
    I = len(alloc.rates)
    selected = rng.choice(I, size=K, p=alloc.probabilities)
    x = np.full(K, alloc.interarrival)
    paid = prices[selected]
    G = float(aoi._G(alloc.interarrival))
    horizon = float(np.sum(x))
    dest = (K * G + float(np.sum(paid))) / horizon
    payoff = np.bincount(selected, weights=paid - costs[selected], minlength=I) / horizon
    return SimTrace(seed, K, x, selected, paid, costs, dest, payoff, alloc, G)


def simulate_sequence(aoi, interarrivals):
    """Long-run AoI cost rate ``sum G(x_k) / sum x_k`` for a given interarrival sequence."""
    x = np.asarray(interarrivals, dtype=float)
    if np.any(x <= 0):
        raise ConfigError("interarrival times must be positive")
    return float(np.sum(aoi._G(x)) / np.sum(x))


def sawtooth_interval_cost(aoi, x, per_interval=SAWTOOTH_SAMPLES):
    """Integrate ``g`` over a sampled sawtooth on ``[0, x]`` with composite Simpson."""
    ages = np.linspace(0.0, x, per_interval + 1)
    return float(simpson(aoi._g(ages), x=ages))
