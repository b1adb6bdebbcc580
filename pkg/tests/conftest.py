import numpy as np
import pytest

from regionboot.regions import SphericalShell
from regionboot.sampling import default_scale_grid, sample_counts


@pytest.fixture(scope="session")
def shell():
    return SphericalShell(m=3, a1=6.0, a2=5.0)


@pytest.fixture(scope="session")
def shell_y():
    y = np.zeros(4)
    y[0] = 5.9
    return y


@pytest.fixture(scope="session")
def grid():
    return default_scale_grid(two_step=True)


@pytest.fixture(scope="session")
def shell_h1_counts(shell, shell_y, grid):
    return sample_counts(shell, shell_y, grid, seed=2024, target="H1")


@pytest.fixture(scope="session")
def shell_h0_counts(shell, shell_y, grid):
    return sample_counts(shell, shell_y, grid, seed=2024, target="H0")


def retry_once(check, seeds):
    """Run a seeded stochastic check, allowing one rerun with a fresh seed."""
    try:
        check(seeds[0])
    except AssertionError:
        check(seeds[1])
