import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from aoimech.cost_dist import CostDistribution, Tabulated, TruncExp, Uniform, \
    cumulative_virtual_cost, iron, lipschitz_bound, virtual_cost
from aoimech.errors import ConfigError, DomainError


def test_virtual_cost_examples(uniform, trunc_exp):
    assert virtual_cost(uniform, 10.0) == pytest.approx(15.0, rel=1e-15)
    assert virtual_cost(trunc_exp, 0.0) == 0.0
    assert virtual_cost(trunc_exp, 1.0) == pytest.approx(math.e, rel=1e-14)


def test_cumulative_virtual_cost_examples(uniform):
    assert cumulative_virtual_cost(uniform, 5.0) == 0.0
    assert cumulative_virtual_cost(Uniform(0.0, 1.0), 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("c", [7.0, 12.5, 30.0])
def test_cumulative_matches_quadrature(uniform, c):
    # Phi(30) = 30 here; integrating (2t - 5)/25 over [5, 30] gives 30, not 17.5
    ref = integrate.quad(lambda t: (2 * t - 5) / 25.0, 5.0, c)[0]
    assert cumulative_virtual_cost(uniform, c) == pytest.approx(ref, rel=1e-13)


def test_cumulative_matches_quadrature_trunc_exp(trunc_exp):
    ref = integrate.quad(lambda t: float(trunc_exp.virtual_cost(t) * trunc_exp.pdf(t)), 0.0, 5.0)[0]
    assert cumulative_virtual_cost(trunc_exp, 5.0) == pytest.approx(ref, rel=1e-10)


def test_regular_priors_need_no_ironing(uniform, trunc_exp):
    assert iron(uniform).is_trivial
    assert iron(trunc_exp).is_trivial
    cs = np.linspace(5.0, 30.0, 101)
    assert np.array_equal(uniform.ironed(cs), uniform.virtual_cost(cs))


def test_bimodal_ironing(bimodal):
    ir = bimodal.ironed
    assert not ir.is_trivial
    grid = np.linspace(bimodal.c_low, bimodal.c_high, 20001)
    assert np.all(np.diff(ir(grid)) >= -1e-12)
    for (a, b), v in zip(ir.intervals, ir.values):
        inside = grid[(grid >= a) & (grid <= b)]
        assert np.all(ir(inside) == v)
        Ga, Gb = bimodal.cdf([a, b])
        # mass of phi * gamma over the interval equals b Gamma(b) - a Gamma(a)
        assert v * (Gb - Ga) == pytest.approx(b * Gb - a * Ga, rel=1e-6)
    # away from the snapped endpoints the raw virtual cost applies unchanged
    pad = 0.01
    outside = grid[np.all([(grid < a - pad) | (grid > b + pad) for a, b in ir.intervals], axis=0)]
    assert np.array_equal(ir(outside), bimodal.virtual_cost(outside))


@pytest.mark.parametrize("dist, expected", [
    (Uniform(5.0, 30.0), 2.0), (TruncExp(1.0, 30.0), 1.0 + math.exp(30.0)), (Uniform(0.0, 1.0), 2.0)])
def test_lipschitz_examples(dist, expected):
    assert lipschitz_bound(dist) == pytest.approx(expected, rel=1e-12)


def test_tabulated_lipschitz_is_flagged(bimodal):
    assert bimodal.lipschitz_is_approximate
    assert not Uniform(0, 1).lipschitz_is_approximate


def test_support_checks(uniform):
    with pytest.raises(DomainError):
        uniform.virtual_cost(4.0)
    with pytest.raises(DomainError):
        uniform.quantile(1.5)
    with pytest.raises((ConfigError, DomainError)):
        Uniform(3.0, 3.0)
    with pytest.raises(ConfigError):
        Tabulated([[0, 0], [1, 0.5], [0.5, 1]])
    with pytest.raises(ConfigError):
        CostDistribution.from_dict({"kind": "gamma"})


def test_from_dict_round_trip(uniform, trunc_exp, bimodal):
    for d in (uniform, trunc_exp, bimodal):
        back = CostDistribution.from_dict(d.to_dict())
        cs = np.linspace(d.c_low, d.c_high, 17)
        assert np.allclose(back.cdf(cs), d.cdf(cs), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 50.0), st.floats(0.0, 1.0))
def test_uniform_quantile_round_trip(lo, width, u):
    d = Uniform(lo, lo + width)
    assert d.cdf(d.quantile(u)) == pytest.approx(u, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.5, 40.0), st.floats(0.0, 1.0))
def test_trunc_exp_quantile_round_trip(mu, c_high, u):
    d = TruncExp(mu, c_high)
    assert d.cdf(d.quantile(u)) == pytest.approx(u, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(1.0, 20.0))
def test_virtual_cost_dominates_cost_and_increases(mu, c_high):
    d = TruncExp(mu, c_high)
    cs = np.linspace(0.0, c_high, 200)
    phi = d.virtual_cost(cs)
    assert np.all(phi >= cs)
    assert np.all(np.diff(phi) > 0)


def test_means(uniform, trunc_exp):
    assert uniform.mean() == pytest.approx(17.5, rel=1e-12)
    ref = integrate.quad(lambda c: c * float(trunc_exp.pdf(c)), 0.0, 30.0)[0]
    assert trunc_exp.mean() == pytest.approx(ref, rel=1e-9)
