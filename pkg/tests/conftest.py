import numpy as np
import pytest

from levelcg.hamiltonian import DOUBLE_WELL, HARMONIC
from levelcg.levelset import GridSpec, build_coefficients, build_graph


@pytest.fixture(scope="session")
def V():
    return DOUBLE_WELL


@pytest.fixture(scope="session")
def G(V):
    return build_graph(V)


@pytest.fixture(scope="session")
def tables(V, G):
    return build_coefficients(V, G, GridSpec())


@pytest.fixture(scope="session")
def harmonic_graph():
    return build_graph(HARMONIC, allow_single_well=True)


@pytest.fixture(scope="session")
def harmonic_tables(harmonic_graph):
    return build_coefficients(HARMONIC, harmonic_graph, GridSpec())


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
