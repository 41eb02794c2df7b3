import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_orthogonal
from shindica.datamodel import DataError
from shindica.whitening import apply_whitening, fit_whitening, invert_whitening


def _cov(Z):
    return Z @ Z.T / Z.shape[1]


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 8), n=st.integers(20, 200), seed=st.integers(0, 10**6))
def test_whitened_covariance_is_identity(k, n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(k, k)) @ rng.laplace(size=(k, n)) + 3.0
    t = fit_whitening(X)
    Z = apply_whitening(t, X)
    assert np.max(np.abs(_cov(Z) - np.eye(t.retained_dim))) < 1e-6
    assert np.max(np.abs(t.forward @ t.inverse - np.eye(t.retained_dim))) < 1e-8
    assert np.trace(_cov(Z)) == pytest.approx(t.retained_dim, abs=1e-6)


def test_trace_identity_for_orthonormal_rows(rng):
    # for orthonormal-row W, trace(Z0 Z0^T)/N = c
    X = rng.normal(size=(6, 6)) @ rng.laplace(size=(6, 500))
    Z = apply_whitening(fit_whitening(X), X)
    for _ in range(50):
        W = random_orthogonal(6, rng)[:3]
        Z0 = W @ Z
        assert np.trace(Z0 @ Z0.T) / Z.shape[1] == pytest.approx(3.0, abs=1e-6)


def test_diagonal_scaling_spectrum(rng):
    E = rng.standard_normal((2, 4000))
    E = apply_whitening(fit_whitening(E), E)
    t = fit_whitening(np.diag([2.0, 1.0]) @ E)
    np.testing.assert_allclose(t.eigenvalues, [4.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(np.abs(t.forward), np.diag([0.5, 1.0]), atol=1e-10)


def test_white_input_gives_orthogonal_transform(rng):
    E = rng.standard_normal((3, 500))
    E = apply_whitening(fit_whitening(E), E)
    K = fit_whitening(E).forward
    np.testing.assert_allclose(K @ K.T, np.eye(3), atol=1e-8)


def test_sign_convention_deterministic(rng):
    X = rng.laplace(size=(4, 100))
    K = fit_whitening(X).forward
    U = K.T * np.sqrt(fit_whitening(X).eigenvalues)
    idx = np.argmax(np.abs(U), axis=0)
    assert np.all(U[idx, np.arange(4)] > 0)
    np.testing.assert_array_equal(K, fit_whitening(X.copy()).forward)


def test_rank_deficiency(rng):
    X = rng.standard_normal((180, 150))
    with pytest.raises(DataError, match="rank deficiency"):
        fit_whitening(X, 180)


def test_zero_variance_feature_fails_in_fit(rng):
    X = rng.standard_normal((3, 50))
    X[1] = 2.0
    with pytest.raises(DataError):
        fit_whitening(X)


def test_reconstruction_and_fraction(rng):
    X = rng.normal(size=(5, 5)) @ rng.laplace(size=(5, 300))
    t = fit_whitening(X)
    np.testing.assert_allclose(invert_whitening(t, apply_whitening(t, X)), X, atol=1e-10)
    t2 = fit_whitening(X, 0.5)
    ev = t.eigenvalues
    r = t2.retained_dim
    assert ev[:r].sum() / ev.sum() >= 0.5 and (r == 1 or ev[: r - 1].sum() / ev.sum() < 0.5)


def test_apply_shape_mismatch(rng):
    t = fit_whitening(rng.standard_normal((3, 40)))
    with pytest.raises(DataError):
        apply_whitening(t, rng.standard_normal((4, 40)))
