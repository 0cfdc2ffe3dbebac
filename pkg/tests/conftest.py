import numpy as np
import pytest

from cellforce import CellSquare, MaterialParams, generate_mesh


@pytest.fixture(scope="session")
def cell():
    return CellSquare(center=(10.0, 10.0), side=6.0)


@pytest.fixture(scope="session")
def mesh_h1(cell):
    return generate_mesh((20.0, 20.0), 1.0, cell)


@pytest.fixture(scope="session")
def mesh_h05(cell):
    return generate_mesh((20.0, 20.0), 0.5, cell)


@pytest.fixture(scope="session")
def hole_h1(cell):
    return generate_mesh((20.0, 20.0), 1.0, cell, exclude_cell_interior=True)


@pytest.fixture(scope="session")
def params():
    return MaterialParams()


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
