import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from brwcrit.graph import WeightedKernel

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dense(rng, n, low=0.0, high=2.0, p_zero=0.0):
    a = rng.uniform(low, high, (n, n))
    if p_zero:
        a[rng.random((n, n)) < p_zero] = 0.0
    return a


def positive_dense(rng, n):
    """Weights in (0, 2], all entries present."""
    return 2.0 - rng.uniform(0.0, 2.0, (n, n))


@st.composite
def dense_kernels(draw, min_n=1, max_n=5, p_zero=0.3):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return WeightedKernel.from_dense(random_dense(rng, n, p_zero=p_zero))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record(number, passed, detail):
    """Log one acceptance line; the summary hook prints them in order."""
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
