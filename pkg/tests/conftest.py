import numpy as np
import pytest

from imbkit.data import ContextSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_context(rng, n0=20, n1=10, dim=3) -> ContextSet:
    X = rng.normal(size=(n0 + n1, dim))
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    order = rng.permutation(n0 + n1)
    return ContextSet(X[order], y[order])
