import numpy as np
import pytest

from rarsel import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def small_dataset(rng):
    """Well-conditioned n=40, p=6 regression with known coefficients."""
    n, p = 40, 6
    x = rng.standard_normal((n, p))
    beta = np.array([2.0, -1.5, 0.0, 0.0, 1.0, 0.0])
    y = x @ beta + 0.1 * rng.standard_normal(n)
    return Dataset(x, y)


def make_dataset(seed: int, n: int = 40, p: int = 6, beta=None, sigma: float = 0.1) -> Dataset:
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
        beta[: min(3, p)] = (2.0, -1.5, 1.0)[: min(3, p)]
    y = x @ np.asarray(beta, dtype=float) + sigma * gen.standard_normal(n)
    return Dataset(x, y)


def orthonormal_design(inner_products, n=32, seed=5) -> Dataset:
    """Mean-zero design with X'X/n = I and X'y/n equal to the given values.

    Columns are orthogonalized against the constant vector, so the solver's
    internal centering leaves the design unchanged.
    """
    gen = np.random.default_rng(seed)
    c = np.asarray(inner_products, dtype=float)
    p = c.size
    basis = np.column_stack([np.ones(n), gen.standard_normal((n, p))])
    q, _ = np.linalg.qr(basis)
    x = q[:, 1 : p + 1] * np.sqrt(n)
    return Dataset(x, x @ c)
