import numpy as np
import pytest

from wasserdual import DiscreteMeasure, shortest_path_space


def random_geodesic_space(rng, n=None, unit_weights=False):
    """Random connected weighted graph metric (spanning tree plus extras)."""
    if n is None:
        n = int(rng.integers(4, 12))
    edges = []
    for i in range(1, n):
        w = 1.0 if unit_weights else float(rng.uniform(0.5, 1.5))
        edges.append((i, int(rng.integers(0, i)), w))
    for _ in range(n // 2):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            w = 1.0 if unit_weights else float(rng.uniform(0.5, 2.0))
            edges.append((int(a), int(b), w))
    return shortest_path_space(edges, n=n)


def random_measure(rng, space, concentration=1.0, sparsity=None):
    w = rng.dirichlet(np.full(space.size, concentration))
    if sparsity is not None:
        keep = rng.choice(space.size, size=min(sparsity, space.size), replace=False)
        mask = np.zeros(space.size, bool)
        mask[keep] = True
        w = np.where(mask, w, 0.0)
        w = w / w.sum()
    return DiscreteMeasure(space, w)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
