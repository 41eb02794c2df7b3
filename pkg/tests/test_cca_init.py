import numpy as np
import pytest

from conftest import whitened_views
from shindica.cca_init import cca_initialize
from shindica.datamodel import DataError, orthogonality_error
from shindica.whitening import apply_whitening, fit_whitening


def test_identical_views(rng):
    Z = whitened_views(rng, [4], 300)[0]
    res = cca_initialize([Z, Z.copy()])
    np.testing.assert_allclose(res.canonical_correlations, 1.0, atol=1e-10)
    W1, W2 = res.initial_unmixing
    np.testing.assert_allclose(W1 @ Z, W2 @ Z, atol=1e-8)


def test_independent_views_null(rng):
    Z1, Z2 = whitened_views(rng, [5, 5], 10000)
    assert max(cca_initialize([Z1, Z2]).canonical_correlations) < 0.2


@pytest.mark.parametrize("D", [2, 3, 4])
def test_shared_sources_give_unit_correlations(D, rng):
    c, k, n = 2, 5, 2000
    S0 = rng.laplace(size=(c, n))
    views = []
    for _ in range(D):
        X = rng.normal(size=(k, k)) @ np.vstack([S0, rng.laplace(size=(k - c, n))])
        views.append(apply_whitening(fit_whitening(X), X))
    res = cca_initialize(views)
    cc = np.asarray(res.canonical_correlations)
    np.testing.assert_allclose(cc[:c], 1.0, atol=1e-6)
    assert np.all(cc[c:] < 1 - 1e-3)
    assert np.all(np.diff(cc) <= 1e-12)
    for W in res.initial_unmixing:
        assert orthogonality_error(W) <= 1e-8
    # the top rows agree across views
    tops = [W[:c] @ Z for W, Z in zip(res.initial_unmixing, views)]
    for t in tops[1:]:
        np.testing.assert_allclose(np.abs(np.sum(t * tops[0], axis=1)) / n, 1.0, atol=1e-6)


def test_unequal_dims_padded(rng):
    views = whitened_views(rng, [3, 6], 500)
    res = cca_initialize(views)
    assert [W.shape for W in res.initial_unmixing] == [(3, 3), (6, 6)]
    assert len(res.canonical_correlations) == 3
    assert all(orthogonality_error(W) <= 1e-8 for W in res.initial_unmixing)


def test_column_permutation_invariance(rng):
    views = whitened_views(rng, [4, 4, 4], 400)
    perm = rng.permutation(400)
    a = cca_initialize(views)
    b = cca_initialize([Z[:, perm] for Z in views])
    for Wa, Wb in zip(a.initial_unmixing, b.initial_unmixing):
        np.testing.assert_allclose(Wa, Wb, atol=1e-8)


def test_errors(rng):
    Z = whitened_views(rng, [3], 100)[0]
    with pytest.raises(DataError):
        cca_initialize([Z])
    with pytest.raises(DataError):
        cca_initialize([Z, 3 * Z])
