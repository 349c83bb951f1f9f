"""Acceptance criteria 1-9, one verdict line each (shown in the terminal summary)."""
import math
import time

import numpy as np
import pytest

from aoimech.aoi_cost import PowerCost
from aoimech.baselines import BenchmarkMechanism, CompleteInformationPricing
from aoimech.cost_dist import TruncExp, Uniform
from aoimech.experiments import expected_cost, run_sweep
from aoimech.mech_multi import MultiSourceMechanism, Source, SourceProfile, aggregate_virtual_cost
from aoimech.mech_quantized import build_quantized, loss_bound
from aoimech.mech_single import NaiveMechanism, SingleSourceMechanism
from aoimech.verify_sim import simulate, simulate_sequence, verify_ic

from oracles import lp_value, random_instance, random_monotone_rule, random_profile, sample_costs, \
    virtual_objective

FMAX = 1e9
# quadrature tolerance for bounds that hold with equality at c_low = 0
BOUND_SLACK = 1e-9


def _costs(dist, alpha, fmax=FMAX):
    aoi = PowerCost(alpha)
    prof = SourceProfile([Source(dist, fmax)])
    return {"star": expected_cost(SingleSourceMechanism(dist, aoi, fmax)).J,
            "C": expected_cost(CompleteInformationPricing(prof, aoi)).J,
            "B": expected_cost(BenchmarkMechanism(prof, aoi)).J}


def test_criterion_1_closed_form_rates(verdict):
    worst, slowest = 0.0, 0.0
    for alpha in (0.5, 1.0, 2.0):
        d = Uniform(5.0, 30.0)
        t0 = time.perf_counter()
        mech = SingleSourceMechanism(d, PowerCost(alpha), math.inf)
        cs = np.linspace(5.0, 30.0, 1000)
        f = mech.rate(cs)
        slowest = max(slowest, time.perf_counter() - t0)
        ref = ((1 + 1 / alpha) * (2 * cs - 5.0)) ** (-1 / (1 + alpha))
        worst = max(worst, float(np.max(np.abs(f / ref - 1))))
    ok = worst <= 1e-8 and slowest < 1.0
    verdict(1, ok, f"max rel err {worst:.2e} (tol 1e-8), slowest {slowest:.3f} s (limit 1 s)")
    assert ok


def test_criterion_2_benchmark_closed_form(verdict):
    worst = 0.0
    for alpha in (0.5, 1.0, 2.0):
        for ch in (10.0, 30.0, 50.0):
            prof = SourceProfile([Source(Uniform(0.0, ch), FMAX)])
            J = expected_cost(BenchmarkMechanism(prof, PowerCost(alpha))).J
            ref = (ch * (1 + 1 / alpha)) ** (alpha / (1 + alpha))
            worst = max(worst, abs(J / ref - 1))
    ok = worst <= 1e-8
    verdict(2, ok, f"max rel err {worst:.2e} over 9 (alpha, c_high) pairs (tol 1e-8)")
    assert ok


def test_criterion_3_ratio_bounds(verdict):
    problems = []
    gaps = []
    for alpha in (0.25, 0.5, 1.0, 2.0, 4.0):
        beta = alpha / (1 + alpha)
        bB, bS = 1 + beta, 2 ** beta
        rB, rS = [], []
        for ch in (10.0, 30.0, 100.0, 300.0, 1000.0):
            J = _costs(Uniform(5.0, ch), alpha)
            rB.append(J["B"] / J["C"])
            rS.append(J["star"] / J["C"])
        if max(rB) > bB * (1 + BOUND_SLACK) or max(rS) > bS * (1 + BOUND_SLACK):
            problems.append(f"bound exceeded at alpha={alpha}")
        if np.any(np.diff(rB) < 0) or np.any(np.diff(rS) < 0):
            problems.append(f"not monotone in c_high at alpha={alpha}")
        if rB[-1] < 0.95 * bB or rS[-1] < 0.95 * bS:
            problems.append(f"not within 5% at c_high=1000, alpha={alpha}")
        gaps.append(min(rB[-1] / bB, rS[-1] / bS))
        # shrinking c_low at c_high = 1000
        lows = [_costs(Uniform(cl, 1000.0), alpha) for cl in (5.0, 1.0, 0.1, 0.0)]
        qB = [J["B"] / J["C"] for J in lows]
        qS = [J["star"] / J["C"] for J in lows]
        if np.any(np.diff(qB) < 0) or np.any(np.diff(qS) < 0):
            problems.append(f"not monotone as c_low -> 0 at alpha={alpha}")
        if max(qB) > bB * (1 + BOUND_SLACK) or max(qS) > bS * (1 + BOUND_SLACK):
            problems.append(f"bound exceeded as c_low -> 0 at alpha={alpha}")
    ok = not problems
    verdict(3, ok, ("both ratios below their bounds, monotone, "
                    f"closest ratio/bound at c_high=1000 is {min(gaps):.4f}") if ok else "; ".join(problems))
    assert ok


def test_criterion_4_trunc_exp(verdict):
    J30 = _costs(TruncExp(1.0, 30.0), 1.0)
    J10 = _costs(TruncExp(1.0, 10.0), 1.0)
    J100 = _costs(TruncExp(1.0, 100.0), 1.0)
    ratio = J30["star"] / J30["C"]
    grow10, grow100 = J10["B"] / J10["star"], J100["B"] / J100["star"]
    ok = 1.8 <= ratio <= 2.2 and grow100 > grow10 and J100["B"] > J10["B"] \
        and abs(J100["star"] - J30["star"]) < 1e-3 * J30["star"]
    verdict(4, ok, f"J*/J_C = {ratio:.4f} at c_high=30; J_B/J* {grow10:.3f} (c_high=10) -> "
                   f"{grow100:.3f} (c_high=100); J* {J30['star']:.6f} -> {J100['star']:.6f}")
    assert ok


def test_criterion_5_quantization(verdict):
    d = Uniform(5.0, 30.0)
    aoi = PowerCost(1.0)
    lines, bound_ok, loss_ok, slowest = [], True, True, 0.0
    for fmax in (FMAX, 0.2):
        base = SingleSourceMechanism(d, aoi, fmax)
        J_star = expected_cost(base).J
        for n in range(1, 11):
            delta = 25.0 / n
            t0 = time.perf_counter()
            J_q = expected_cost(build_quantized(base, delta)).J
            slowest = max(slowest, time.perf_counter() - t0)
            loss = J_q - J_star
            bound_ok &= loss <= loss_bound([(d, fmax)], delta)
            if fmax == FMAX:
                lines.append(f"{n}:{100 * loss / J_star:.3f}%")
                if n >= 3:
                    loss_ok &= loss < 1e-3 * J_star
    ok = bound_ok and loss_ok and slowest < 10.0
    verdict(5, ok, f"loss <0.1% for >=3 intervals: {loss_ok}; loss within the Lipschitz bound: {bound_ok}; "
                   f"slowest {slowest:.3f} s; relative loss by intervals {' '.join(lines)}")
    assert ok


def test_criterion_6_certification(verdict):
    d = Uniform(5.0, 30.0)
    aoi = PowerCost(1.0)
    base = SingleSourceMechanism(d, aoi, math.inf)
    single = {"optimal": verify_ic(base), "quantized": verify_ic(build_quantized(base, 1.0)),
              "benchmark": verify_ic(BenchmarkMechanism(SourceProfile([Source(d, FMAX)]), aoi))}
    prof = SourceProfile([Source(TruncExp(2.0, 3.0), 1.0), Source(Uniform(0.2, 2.0), 0.8),
                          Source(TruncExp(1.0, 3.0), 0.5)])
    multi_base = MultiSourceMechanism(prof, aoi)
    multi = {"optimal": verify_ic(multi_base, seed=1),
             "quantized": verify_ic(build_quantized(multi_base, 0.25), seed=1),
             "benchmark": verify_ic(BenchmarkMechanism(prof, aoi), seed=1)}
    naive = verify_ic(NaiveMechanism(d, aoi))
    pass_single = all(r.ic and r.ir and r.max_gain <= 1e-6 for r in single.values())
    pass_multi = all(r.ic and r.ir for r in multi.values())
    best = naive.sources[0].worst["best_deviation"]
    ok = pass_single and pass_multi and not naive.ic and best == pytest.approx(30.0)
    gains = ", ".join(f"{k} {v.max_gain:.1e}" for k, v in single.items())
    verdict(6, ok, f"single-source max gains: {gains}; multi-source IC/IR within 3 SE: {pass_multi}; "
                   f"naive best deviation {best:g} with gain {naive.max_gain:.3f}")
    assert ok


def test_criterion_7_multi_oracles(verdict):
    rng = np.random.default_rng(20240607)
    worst = 0.0
    for _ in range(1000):
        phi, fmax, F = random_instance(rng, max_sources=4)
        value, _ = aggregate_virtual_cost(phi, fmax, F)
        ref = lp_value(phi, fmax, F)[0]
        worst = max(worst, abs(value - ref) / max(1.0, abs(ref)))
    aoi = PowerCost(1.0)
    beaten = 0
    for _ in range(20):
        prof = random_profile(rng, int(rng.integers(2, 5)))
        mech = MultiSourceMechanism(prof, aoi)
        C = sample_costs(prof, 4096, rng)
        J_opt = float(np.mean(virtual_objective(prof, aoi, C, mech.rates_batch(C)[0])))
        if all(J_opt <= float(np.mean(virtual_objective(prof, aoi, C, random_monotone_rule(rng, prof)(C))))
               for _ in range(100)):
            beaten += 1
    ok = worst <= 1e-12 and beaten == 20
    verdict(7, ok, f"greedy vs LP max error {worst:.1e} over 1000 instances (tol 1e-12); "
                   f"optimal rule beat all 100 random monotone rules on {beaten}/20 instances")
    assert ok


def test_criterion_8_simulator(verdict):
    aoi = PowerCost(1.0)
    prof = SourceProfile([Source(Uniform(0.0, 2.0), 0.3), Source(Uniform(0.0, 2.0), 0.3)])
    trace = simulate(MultiSourceMechanism(prof, aoi), [0.3, 0.5], 100_000, seed=2024)
    exp = trace.expected_rates()
    errs = [abs(trace.destination_rate / exp["destination_rate"] - 1)]
    errs += list(np.abs(trace.source_payoff_rates / exp["source_payoff_rates"] - 1))
    rng = np.random.default_rng(8)
    x_bar = trace.allocation.interarrival
    equal = simulate_sequence(aoi, np.full(1000, x_bar))
    dominated = 0
    for _ in range(100):
        x = rng.uniform(0.0, 2.0 * x_bar, 1000)
        x *= x_bar / x.mean()
        dominated += simulate_sequence(aoi, x) >= equal
    ok = max(errs) < 0.01 and dominated == 100
    verdict(8, ok, f"max relative deviation of empirical rates {max(errs):.2e} (tol 1e-2); "
                   f"equal spacing cheaper than {dominated}/100 random same-mean sequences")
    assert ok


def test_criterion_9_heterogeneity(verdict):
    rows_mu = run_sweep("fig8", {}, seed=9)
    rows_I = [r for r in run_sweep("fig7", {}, seed=9) if r["param_name"] == "I"]
    gap_mu = [r["J_benchmark"] - r["J_optimal"] for r in rows_mu]
    gap_I = [r["J_benchmark"] - r["J_optimal"] for r in rows_I]
    rel_se = max(r["stderr"] / r["J_optimal"] for r in rows_mu + rows_I)
    finite = all(np.isfinite(gap_mu)) and all(np.isfinite(gap_I))
    ok = finite and np.all(np.diff(gap_mu) >= 0) and np.all(np.diff(gap_I) < 0) and rel_se < 0.005
    verdict(9, ok, "gap over mu " + " ".join(f"{g:.4f}" for g in gap_mu)
            + "; gap over I=2..8 " + " ".join(f"{g:.4f}" for g in gap_I) + f"; max SE/J {rel_se:.1e}")
    assert ok
