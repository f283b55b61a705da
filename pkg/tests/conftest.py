import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def label_vectors(draw, n=None, max_n=30, max_k=6):
    n = draw(st.integers(1, max_n)) if n is None else n
    k = draw(st.integers(1, max_k))
    return draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))


@st.composite
def ensembles(draw, max_n=20, max_m=4, max_k=5):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(2, max_m))
    return [draw(label_vectors(n=n, max_k=max_k)) for _ in range(m)]


def random_ensemble(rng, n, M, max_k=5):
    return [rng.integers(0, rng.integers(1, max_k + 1), size=n).tolist() for _ in range(M)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
