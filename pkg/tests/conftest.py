import numpy as np
import pytest
from scipy.stats import norm

from aoimech.aoi_cost import PowerCost
from aoimech.cost_dist import Tabulated, TruncExp, Uniform


@pytest.fixture
def uniform():
    return Uniform(5.0, 30.0)


@pytest.fixture
def trunc_exp():
    return TruncExp(1.0, 30.0)


@pytest.fixture
def bimodal():
    c = np.linspace(0.0, 10.0, 201)
    cdf = 0.5 * norm.cdf(c, 2.0, 0.6) + 0.5 * norm.cdf(c, 8.0, 0.6)
    return Tabulated(np.column_stack([c, cdf]))


@pytest.fixture
def power1():
    return PowerCost(1.0)


# acceptance verdict lines ------------------------------------------------------

_VERDICTS = {}


@pytest.fixture
def verdict():
    """``verdict(n, ok, detail)`` records and prints one line for criterion ``n``."""
    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        _VERDICTS[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
