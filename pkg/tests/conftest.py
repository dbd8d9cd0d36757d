import numpy as np
import pytest

from tenkrylov.core import TuckerTensor, random_orthonormal, tucker_reconstruct


def exact_tucker_dense(shape, ranks, seed):
    rng = np.random.default_rng(seed)
    factors = tuple(random_orthonormal(n, r, rng) for n, r in zip(shape, ranks))
    t = TuckerTensor(rng.standard_normal(ranks), factors, (True, True, True), ortho_tol=1e-10)
    return t, tucker_reconstruct(t)


def rel(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (nb if nb else 1.0)


def unit(n, rng):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
