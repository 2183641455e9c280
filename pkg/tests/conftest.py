import pytest

from pigroups import pi_basis, pipe_quantity_system


@pytest.fixture(scope="session")
def pipe_system():
    return pipe_quantity_system()


@pytest.fixture(scope="session")
def pipe_basis(pipe_system):
    return pi_basis(pipe_system)
