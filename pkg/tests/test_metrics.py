import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shindica.datamodel import DataError
from shindica.metrics import amari_distance, correlation_matrix, hungarian, mcc


def test_amari_hand_example():
    assert amari_distance(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]])) == 2.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 7))
def test_amari_scaled_permutation_zero(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    P = np.eye(n)[rng.permutation(n)]
    L = np.diag(rng.choice([-1, 1], n) * rng.uniform(0.2, 5, n))
    assert amari_distance(A, A @ P @ L) == pytest.approx(0.0, abs=1e-12)
    assert amari_distance(A, A) == 0.0


def test_amari_normalized_range(rng):
    A, B = rng.standard_normal((2, 6, 6))
    d = amari_distance(A, B, normalize=True)
    assert 0 < d <= 1
    assert d == pytest.approx(amari_distance(A, B) / (2 * 6 * 5))


def test_amari_rejects_singular():
    with pytest.raises(DataError):
        amari_distance(np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(DataError):
        amari_distance(np.eye(2), np.eye(3))


def test_hungarian_examples():
    C = 1 - np.eye(3)
    assert hungarian(C) == ([(0, 0), (1, 1), (2, 2)], 0.0)
    assert hungarian(np.array([[4.0, 1.0], [2.0, 8.0]])) == ([(0, 1), (1, 0)], 3.0)


def _brute(C):
    n, m = C.shape
    if n <= m:
        return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return _brute(C.T)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 6), m=st.integers(1, 6))
def test_hungarian_brute_force(seed, n, m):
    C = np.random.default_rng(seed).uniform(-3, 3, size=(n, m))
    pairs, total = hungarian(C)
    assert len(pairs) == min(n, m)
    assert len({i for i, _ in pairs}) == len({j for _, j in pairs}) == min(n, m)
    assert total == pytest.approx(_brute(C), abs=1e-10)
    if n == m:
        assert total <= np.trace(C) + 1e-12


def test_hungarian_errors():
    with pytest.raises(DataError):
        hungarian(np.zeros((0, 3)))
    with pytest.raises(DataError):
        hungarian(np.array([[np.inf]]))


def test_mcc_signed_permuted(rng):
    T = rng.standard_normal((5, 200))
    E = (rng.choice([-1, 1], size=(5, 1)) * T)[rng.permutation(5)]
    score, pairs = mcc(E, T)
    assert abs(score - 1.0) <= 1e-12
    assert mcc(T, T)[0] == pytest.approx(1.0, abs=1e-12)


def test_mcc_null():
    rng = np.random.default_rng(0)
    assert mcc(rng.standard_normal((5, 10000)), rng.standard_normal((5, 10000)))[0] < 0.2


def test_mcc_errors(rng):
    with pytest.raises(DataError, match="zero-variance"):
        correlation_matrix(np.ones((1, 5)), rng.standard_normal((1, 5)))
    with pytest.raises(DataError):
        mcc(rng.standard_normal((2, 5)), rng.standard_normal((3, 5)))
