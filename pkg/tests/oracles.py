"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np
from scipy.integrate import quad
from scipy.optimize import linprog

from aoimech.aoi_cost import PowerCost
from aoimech.cost_dist import TruncExp, Uniform
from aoimech.mech_multi import Source, SourceProfile


def lp_value(phi, fmax, F):
    """min phi . f  s.t.  sum f = F, 0 <= f <= fmax, by HiGHS."""
    res = linprog(phi, A_eq=np.ones((1, len(phi))), b_eq=[F],
                  bounds=[(0.0, None if np.isinf(m) else m) for m in fmax], method="highs")
    assert res.status == 0, res.message
    return float(np.dot(phi, res.x)), res.x, float(res.eqlin.marginals[0])


def random_instance(rng, max_sources=4):
    I = int(rng.integers(1, max_sources + 1))
    phi = rng.uniform(0.0, 10.0, I)
    fmax = rng.choice([0.5, 1.0, 2.0, 3.5, np.inf], I)
    total = np.sum(fmax)
    F = rng.uniform(0.0, min(total, 10.0))
    return phi, fmax, F


def random_profile(rng, I):
    sources = []
    for _ in range(I):
        if rng.random() < 0.5:
            lo = rng.uniform(0.0, 3.0)
            d = Uniform(lo, lo + rng.uniform(0.5, 5.0))
        else:
            d = TruncExp(rng.uniform(0.2, 2.0), rng.uniform(1.0, 8.0))
        sources.append(Source(d, float(rng.choice([0.5, 1.0, 2.0]))))
    return SourceProfile(sources)


def virtual_objective(profile, aoi, C, f):
    """Per-profile ``F G(1/F) + sum phi_i f_i`` with the ironed virtual costs."""
    F = f.sum(axis=1)
    x = 1.0 / F
    return aoi._G(x) * F + np.sum(profile.ironed_phi(C) * f, axis=1)


def random_monotone_rule(rng, profile):
    """``f_i = min(f_max_i, a_i exp(-b_i c_i))``: feasible and non-increasing in own cost."""
    a = rng.uniform(0.05, 3.0, len(profile))
    b = rng.uniform(0.0, 1.0, len(profile))
    return lambda C: np.minimum(profile.fmax, a * np.exp(-b * C))


def sample_costs(profile, n, rng):
    u = rng.random((n, len(profile)))
    return np.column_stack([d.quantile(u[:, j]) for j, d in enumerate(profile.dists)])


def brute_force_tail(mech, i, C, n=20001):
    """Integral of ``f_i(z, c_-i)`` over ``[c_i, c_high_i]`` by ``quad`` between located jumps.

    A dense scan flags cells where the rate moves a lot; each is bisected
    down to adjacent doubles so ``quad`` only sees continuous pieces.
    """
    hi = mech.profile.dists[i].c_high

    def f(z):
        z = np.atleast_1d(z)
        rows = np.repeat(C[None, :], z.size, axis=0)
        rows[:, i] = z
        return mech.rates_batch(rows)[0][:, i]

    z = np.linspace(C[i], hi, n)
    fz = f(z)
    cuts = [C[i]]
    # jumps, plus the points where the rate leaves zero, so quad never
    # samples only one side of a narrow positive stretch
    on = fz > 0
    flagged = (np.abs(np.diff(fz)) > 1e-4) | (on[1:] != on[:-1])
    for k in np.flatnonzero(flagged):
        a, b, fa, fb = z[k], z[k + 1], fz[k], fz[k + 1]
        while b - a > 4 * np.spacing(b):
            m = 0.5 * (a + b)
            fm = f(m)[0]
            if on[k] != on[k + 1]:
                left = (fm > 0) == on[k]
            else:
                left = abs(fm - fa) < abs(fm - fb)
            if left:
                a = m
            else:
                b = m
        cuts.append(0.5 * (a + b))
    cuts.append(hi)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            total += quad(lambda t: float(f(t)[0]), a, b, limit=500, epsabs=1e-13, epsrel=1e-12)[0]
    return float(total)


POWER1 = PowerCost(1.0)
