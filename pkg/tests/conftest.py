import numpy as np
import pytest

from exactscan import engine
from exactscan.engine import CellModel
from exactscan.graph import EliminationOrdering, build_clique_tree
from exactscan.windows import WindowFamily

# the 20-window, 9-cell example used throughout: singletons plus the listed
# multi-cell windows; counts (2,7,7,2,2,2,2,2,2), uniform baselines, N = 28
Z20 = [
    [1], [2], [3], [4], [5], [6], [7], [8], [9],
    [4, 5], [7, 8], [4, 8], [3, 7], [4, 5, 8], [2, 4],
    [1, 3], [2, 3], [2, 4, 5], [3, 6], [8, 9],
]
Z20_COUNTS = (2, 7, 7, 2, 2, 2, 2, 2, 2)
PAPER_ORDERING = (9, 1, 6, 3, 7, 2, 4, 5, 8)


@pytest.fixture(scope="session")
def z20_family():
    return WindowFamily.from_iterable(Z20)


@pytest.fixture(scope="session")
def paper_ordering():
    return EliminationOrdering(PAPER_ORDERING)


@pytest.fixture(scope="session")
def z20_tree(z20_family, paper_ordering):
    return build_clique_tree(z20_family, 9, paper_ordering)


@pytest.fixture(scope="session")
def z20_model():
    return CellModel.with_uniform_baselines(Z20_COUNTS)


def random_scan_instance(rng: np.random.Generator):
    """Small random instance: model, window family, and a clique tree."""
    n = int(rng.integers(2, 7))
    counts = rng.multinomial(int(rng.integers(1, 9)), np.ones(n) / n)
    lam = rng.uniform(0.2, 3.0, n)
    model = CellModel(tuple(int(c) for c in counts), tuple(float(x) for x in lam))
    n_windows = min(int(rng.integers(1, 7)), 2**n - 1)
    wins: set[tuple[int, ...]] = set()
    while len(wins) < n_windows:
        size = int(rng.integers(1, n + 1))
        members = rng.choice(np.arange(1, n + 1), size=size, replace=False)
        wins.add(tuple(sorted(int(v) for v in members)))
    family = WindowFamily.from_iterable(sorted(wins))
    tree = build_clique_tree(family, n)
    return model, family, tree


def backends():
    return engine.available_backends()
