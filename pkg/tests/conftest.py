import numpy as np
import pytest

from qseer.graph import gen_random, make_graph
from qseer.qaoa import ParamVector


@pytest.fixture
def triangle():
    return make_graph(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def path3():
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def k4():
    return make_graph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])


@pytest.fixture
def cycle4():
    return make_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def single_edge():
    return make_graph(2, [(0, 1)])


def random_instance(rng, n_max=8, p_max=3, weighted=None):
    """One random (graph, params) pair for property tests."""
    n = int(rng.integers(3, n_max + 1))
    if weighted is None:
        weighted = bool(rng.integers(0, 2))
    weights = ("uniform", 0.2, 2.0) if weighted else "none"
    g = gen_random("erdos_renyi", n, prob=float(rng.uniform(0.4, 0.9)),
                   weights=weights, seed=int(rng.integers(0, 2**31)))
    p = int(rng.integers(1, p_max + 1))
    params = ParamVector(gamma=tuple(rng.uniform(-np.pi, np.pi, p)),
                         beta=tuple(rng.uniform(-np.pi / 2, np.pi / 2, p)))
    return g, params
