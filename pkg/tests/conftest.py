import numpy as np
import pytest

from digraph_optim import sim
from digraph_optim.graph import WeightedDigraph, build_laplacian


def random_weight_balanced_digraph(n: int, rng: np.random.Generator,
                                   cycles: int = 3) -> WeightedDigraph:
    """Sum of weighted n-cycles: weight-balanced and strongly connected by
    construction."""
    A = np.zeros((n, n))
    for _ in range(cycles):
        order = rng.permutation(n)
        w = rng.uniform(0.5, 1.5)
        for i in range(n):
            A[order[i], order[(i + 1) % n]] += w
    np.fill_diagonal(A, 0.0)
    return WeightedDigraph(A)


def random_connected_undirected(n: int, rng: np.random.Generator
                                ) -> WeightedDigraph:
    """Random spanning tree plus extra symmetric edges."""
    A = np.zeros((n, n))
    for j in range(1, n):
        i = int(rng.integers(0, j))
        w = rng.uniform(0.5, 1.5)
        A[i, j] = A[j, i] = w
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            w = rng.uniform(0.5, 1.5)
            A[i, j] = A[j, i] = w
    return WeightedDigraph(A)


@pytest.fixture
def counterexample():
    return sim.counterexample_graph()


@pytest.fixture
def counterexample_bundle(counterexample):
    return build_laplacian(counterexample)


@pytest.fixture
def two_node_graph():
    return WeightedDigraph(np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def directed_3_cycle():
    return WeightedDigraph(np.array([[0.0, 1.0, 0.0],
                                     [0.0, 0.0, 1.0],
                                     [1.0, 0.0, 0.0]]))
