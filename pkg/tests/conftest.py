import numpy as np
import pytest

from stochpower.hamiltonian import DenseMatrix, IterationMatrix, random_test_matrix
from stochpower.hubbard import HubbardMomentum


@pytest.fixture(scope="session")
def hubbard2():
    return HubbardMomentum(2, 1, 1, 4.0)


@pytest.fixture(scope="session")
def hubbard4():
    return HubbardMomentum(4, 5, 5, 4.0)


@pytest.fixture(scope="session")
def rand200():
    return random_test_matrix(200, seed=0)


@pytest.fixture(scope="session")
def A200(rand200):
    return IterationMatrix(rand200, 0.1)


def near_identity(n, seed, scale=0.05, density=0.5):
    """Symmetric I + noise with a sparse random pattern and a dominant top state."""
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    mask = np.triu(rng.random((n, n)) < density, 1)
    a[mask] = rng.normal(scale=scale, size=mask.sum())
    a = a + a.T
    a[np.diag_indices(n)] = 1.0 - np.linspace(0.0, 0.2, n)
    return DenseMatrix(a)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
