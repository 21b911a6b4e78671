import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_upper(rng, n, offdiag=0.5):
    """Well-conditioned complex upper-triangular matrix with diagonal in [0.5, 1.5]."""
    U = np.triu(crandn(rng, n, n), 1) * (offdiag / np.sqrt(max(n, 1)))
    U[np.diag_indices(n)] = rng.uniform(0.5, 1.5, size=n)
    return U


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    X = crandn(rng, n, rank)
    P = X @ X.conj().T
    return (P + P.conj().T) / 2
