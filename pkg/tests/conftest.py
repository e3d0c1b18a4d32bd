import itertools

import numpy as np
import pytest

from annealtrack import WeightedGraph


def brute_force_mwis(g: WeightedGraph):
    """Independent oracle: enumerate every subset with itertools."""
    best_w = 0.0
    best = frozenset()
    verts = range(g.n)
    for r in range(g.n + 1):
        for combo in itertools.combinations(verts, r):
            s = set(combo)
            if any(i in s and j in s for i, j in g.edges):
                continue
            w = sum(g.weights[v] for v in combo)
            if w > best_w + 1e-12 or (abs(w - best_w) <= 1e-12
                                      and tuple(sorted(combo)) < tuple(sorted(best))):
                best_w, best = w, frozenset(combo)
    return best, best_w


def random_graph(rng: np.random.Generator, n: int, p_edge: float = 0.4,
                 positive: bool = True) -> WeightedGraph:
    if positive:
        weights = rng.uniform(0.1, 5.0, size=n)
    else:
        weights = rng.uniform(-2.0, 5.0, size=n)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p_edge]
    return WeightedGraph.from_data(weights, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
