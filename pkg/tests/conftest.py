import numpy as np
import pytest

from grushinpme.grid import DomainSpec, build_grid
from grushinpme.operator import assemble


def unit_square(n, gamma=1.0, ny=None):
    return DomainSpec(1, 1, gamma, [(0.0, 1.0), (0.0, 1.0)], [n, n if ny is None else ny])


def grid_and_op(n, gamma=1.0, ny=None):
    grid = build_grid(unit_square(n, gamma, ny))
    return grid, assemble(grid)


def laplacian_eigenvalue(h):
    """Smallest eigenvalue of the 2-D 5-point Dirichlet Laplacian on the unit square."""
    return 2 * (4.0 / h**2) * np.sin(np.pi * h / 2) ** 2


@pytest.fixture(scope="session")
def square31():
    return grid_and_op(31, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
