import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoimech.aoi_cost import AoiCostModel, G_eval, PowerCost, TabulatedCost, g_eval, \
    invert_marginal_reduction, marginal_reduction
from aoimech.errors import ConfigError, DomainError


@pytest.mark.parametrize("alpha, age, expected", [(1, 3, 3), (2, 0, 0), (0.5, 4, 2)])
def test_g_examples(alpha, age, expected):
    assert g_eval(PowerCost(alpha), age) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("alpha, x, expected", [(1, 2, 2), (1, 0, 0), (2, 3, 9)])
def test_G_examples(alpha, x, expected):
    assert G_eval(PowerCost(alpha), x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("alpha, x, expected", [(1, 2, 2), (1, 1e-300, 0), (2, 3, 18)])
def test_marginal_reduction_examples(alpha, x, expected):
    assert marginal_reduction(PowerCost(alpha), x) == pytest.approx(expected, rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("target, expected", [(2, 2), (0, 0), (25, math.sqrt(50))])
def test_invert_examples(target, expected):
    assert invert_marginal_reduction(PowerCost(1), target) == pytest.approx(expected, rel=1e-13)


def test_negative_inputs_rejected():
    with pytest.raises(DomainError):
        g_eval(PowerCost(1), -1.0)
    with pytest.raises(DomainError):
        G_eval(PowerCost(1), [1.0, -0.5])


def test_bad_alpha_and_kind():
    with pytest.raises((ConfigError, DomainError)):
        PowerCost(0.0)
    with pytest.raises(ConfigError):
        AoiCostModel.from_dict({"kind": "cubic"})


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1e-3, 1e3))
def test_inverse_round_trip(alpha, t):
    m = PowerCost(alpha)
    x = invert_marginal_reduction(m, t)
    assert marginal_reduction(m, x) == pytest.approx(t, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1e-3, 50.0), st.floats(1e-3, 50.0))
def test_M_increasing_G_convex(alpha, a, b):
    m = PowerCost(alpha)
    lo, hi = min(a, b), max(a, b)
    assert marginal_reduction(m, lo) <= marginal_reduction(m, hi)
    mid = 0.5 * (lo + hi)
    assert G_eval(m, mid) <= 0.5 * (G_eval(m, lo) + G_eval(m, hi)) * (1 + 1e-12)


def test_generic_inverse_matches_closed_form():
    m = PowerCost(1.5)
    t = np.array([0.1, 1.0, 7.0, 300.0])
    generic = AoiCostModel._Minv(m, t)
    assert np.allclose(generic, m._Minv(t), rtol=1e-10)


def test_tabulated_reproduces_linear_cost():
    ages = np.linspace(0.0, 20.0, 41)
    tab = TabulatedCost(np.column_stack([ages, ages]))
    xs = np.array([0.5, 3.0, 12.5])
    assert np.allclose(tab.G(xs), xs ** 2 / 2, rtol=1e-12)
    assert np.allclose(tab.marginal_reduction(xs), xs ** 2 / 2, rtol=1e-12)
    assert tab.invert_marginal_reduction(2.0) == pytest.approx(2.0, rel=1e-9)


def test_rate_helpers_limits():
    m = PowerCost(1.0)
    assert np.isinf(m.rate_for_virtual_cost(0.0))
    assert m.rate_for_virtual_cost(8.0) == pytest.approx(0.25)
    assert np.isinf(m.reduction_at_rate(0.0))
    assert m.reduction_at_rate(np.inf) == 0.0
