import math

import numpy as np
import pytest
from scipy import integrate

from aoimech.cost_dist import TruncExp, Uniform
from aoimech.errors import ConfigError, DomainError, ResourceError
from aoimech.mech_multi import MultiSourceMechanism, Source, SourceProfile
from aoimech.mech_quantized import QuantizedMultiMechanism, QuantizedSingleMechanism, Quantizer, \
    build_quantized, loss_bound, quantize_report
from aoimech.mech_single import SingleSourceMechanism

from oracles import POWER1, brute_force_tail


@pytest.mark.parametrize("c, expected", [(4.3, 4.5), (4.5, 4.5), (30.0, 29.5), (0.0, 0.5)])
def test_quantize_report_examples(c, expected):
    assert quantize_report(1.0, c, (0.0, 30.0)) == expected


def test_quantize_report_rejects_outside_support():
    with pytest.raises(DomainError):
        quantize_report(1.0, 31.0, (0.0, 30.0))


def test_partial_top_cell_midpoint_clamped():
    q = Quantizer(1.0, 0.0, 2.5)
    assert len(q) == 3
    assert q.mids[-1] == 2.5
    assert q(2.5) == 2.5


def test_cell_count_and_limits(uniform):
    q = build_quantized(SingleSourceMechanism(uniform, POWER1), 1.0)
    assert len(q.quantizer) == 25
    with pytest.raises(ResourceError):
        Quantizer(1e-7, 0.0, 30.0)
    with pytest.raises(ConfigError):
        Quantizer(0.0, 0.0, 1.0)


def test_fine_grid_recovers_optimal(uniform):
    base = SingleSourceMechanism(uniform, POWER1, math.inf)
    q = build_quantized(base, 1e-3)
    cs = np.linspace(5.2, 29.8, 50)
    assert np.allclose(q.rate(cs), base.rate(cs), rtol=1e-4)


def test_payment_example_and_quadrature(uniform):
    base = SingleSourceMechanism(uniform, POWER1, math.inf)
    q = build_quantized(base, 1.0)
    mids = np.arange(10.5, 30.0, 1.0)
    manual = 10.0 * base.rate(10.5) + np.sum(base.rate(mids))
    assert q.payment(10.0) == pytest.approx(manual, rel=1e-14)
    ref = 10.0 * q.rate(10.0) + integrate.quad(lambda z: float(q.rate(z)), 10.0, 30.0,
                                               points=q.breakpoints(), limit=200)[0]
    assert q.payment(10.0) == pytest.approx(ref, rel=1e-10)
    assert q.payment(30.0) == pytest.approx(30.0 * q.rate(30.0), rel=1e-14)


def test_piecewise_constant_non_increasing(trunc_exp):
    q = build_quantized(SingleSourceMechanism(trunc_exp, POWER1, 5.0), 0.7)
    cs = np.linspace(0.0, 30.0, 3001)
    f = q.rate(cs)
    assert np.all(np.diff(f) <= 0)
    assert len(np.unique(f)) <= len(q.quantizer)


def test_loss_bound_examples():
    assert loss_bound([(Uniform(5.0, 30.0), 0.2)], 1.0) == pytest.approx(0.4)
    assert loss_bound([(Uniform(5.0, 30.0), 0.2)], 0.0) == 0.0
    two = [(Uniform(5.0, 30.0), 0.2), (Uniform(0.0, 1.0), 0.3)]
    assert loss_bound(two, 0.5) == pytest.approx(0.5)


def test_multi_payments_exact_sum():
    prof = SourceProfile([Source(TruncExp(1.0, 6.0), 2.0), Source(Uniform(0.5, 4.0), 1.0)])
    q = build_quantized(MultiSourceMechanism(prof, POWER1), 0.25)
    assert isinstance(q, QuantizedMultiMechanism)
    for C in ([0.3, 1.1], [2.0, 0.6], [6.0, 4.0]):
        C = np.array(C)
        f = q.rates_batch(C[None, :])[0][0]
        h = q.payments(C)
        for i in range(2):
            ref = C[i] * f[i] + brute_force_tail(q, i, C)
            assert h[i] == pytest.approx(ref, rel=1e-9, abs=1e-11)


def test_multi_rates_use_midpoints():
    prof = SourceProfile([Source(Uniform(0.0, 2.0), 1.0), Source(Uniform(0.0, 2.0), 1.0)])
    base = MultiSourceMechanism(prof, POWER1)
    q = build_quantized(base, 0.5)
    C = np.array([[0.1, 1.9], [0.6, 0.9]])
    assert np.allclose(q.rates_batch(C)[0], base.rates_batch(np.array([[0.25, 1.75], [0.75, 0.75]]))[0])


def test_single_type(uniform):
    assert isinstance(build_quantized(SingleSourceMechanism(uniform, POWER1), 2.0), QuantizedSingleMechanism)
    with pytest.raises(ConfigError):
        build_quantized(object(), 1.0)
