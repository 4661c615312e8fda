import warnings

import numpy as np
import pytest

from cltlearn.forge import IsolatedTargetUnderUniformScheme, gen_power_law, make_instance, stream
from cltlearn.model import CltInstance, Graph


def random_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    hit = rng.random((n, n)) < p
    np.fill_diagonal(hit, False)
    return Graph(n, np.argwhere(hit))


def random_instance(n: int, s: int, seed: int, scheme: str = "weighted-cascade",
                    p: float | None = None, q: int = 3) -> CltInstance:
    """Small Erdos-Renyi instance through the regular generator."""
    rng = stream(seed, 99, n, s)
    g = random_graph(n, p if p is not None else min(0.5, 3.0 / max(n - 1, 1)), rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsolatedTargetUnderUniformScheme)
        return make_instance(g, s, q, scheme, seed)


def hand_instance(n, s, edges, weights, thresholds, q=3) -> CltInstance:
    """``edges`` 0-based; ``weights[k][c]`` and ``thresholds[i][c]`` as decimal strings."""
    from cltlearn.fixed import parse_units
    g = Graph(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    w = np.zeros((g.m, s), dtype=np.int64)
    for (a, b), row in zip(edges, weights):
        w[g.edge_index(a, b)] = [parse_units(x, q) for x in row]
    th = np.array([[parse_units(x, q) for x in row] for row in thresholds], dtype=np.int64)
    return CltInstance(g, s, q, w, th)


def status(n, s, pairs):
    a = np.zeros((n, s), dtype=bool)
    for i, c in pairs:
        a[i, c] = True
    return a


@pytest.fixture
def powerlaw_instance():
    return make_instance(gen_power_law(32, 2, 3), 2, 3, "weighted-cascade", 3)
