import numpy as np
import pytest
from scipy.stats import ortho_group

from shindica.whitening import apply_whitening, fit_whitening

PLANTED_PAIRS = ((0, 1), (5, 12), (20, 27))


def random_orthogonal(r, rng):
    if r == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    return ortho_group.rvs(r, random_state=rng)


def whitened_views(rng, dims, n):
    """Exactly white random views (empirical covariance I, 1/N normalization)."""
    out = []
    for r in dims:
        X = rng.laplace(size=(r, n))
        out.append(apply_whitening(fit_whitening(X), X))
    return out


def planted_views(seed, rows=12, features=30, pairs=PLANTED_PAIRS, noise=0.3):
    """Two views (rows x features) whose planted feature pairs share a latent column."""
    rng = np.random.default_rng(seed)
    views = []
    for _ in range(2):
        S = rng.laplace(size=(rows, features))
        for i, j in pairs:
            S[:, j] = S[:, i] + noise * rng.standard_normal(rows)
        A = rng.normal(1.0, 0.1, size=(rows, rows))
        views.append(A @ S)
    return views


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
