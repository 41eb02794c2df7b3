import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_orthogonal, whitened_views
from shindica.datamodel import DataError, NumericalError, orthogonality_error
from shindica.objective import ObjectiveConfig, value_and_gradient
from shindica.optimizer import OptimizerConfig, minimize_orthogonal, retract_skew, riemannian_gradient


def _rot(t):
    return np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])


def test_retract_planar_rotation():
    for t in (0.0, 0.3, -1.2, 3.0):
        S = np.array([[0.0, t], [-t, 0.0]])
        np.testing.assert_allclose(retract_skew(np.eye(2), S), _rot(t), atol=1e-14)


def test_retract_properties(rng):
    W = random_orthogonal(5, rng)
    A = rng.standard_normal((5, 5))
    S = A - A.T
    np.testing.assert_array_equal(retract_skew(W, np.zeros((5, 5))), W)
    assert orthogonality_error(retract_skew(W, S)) <= 1e-8
    np.testing.assert_allclose(expm(S) @ expm(-S), np.eye(5), atol=1e-10)
    with pytest.raises(DataError):
        retract_skew(W, A)


def test_trace_on_rotations_converges_to_identity():
    sol, diag = minimize_orthogonal(
        [_rot(np.pi / 2)], lambda ws: -np.trace(ws[0]), lambda ws: [-np.eye(2)]
    )
    np.testing.assert_allclose(sol[0], np.eye(2), atol=1e-6)
    assert diag.converged


def test_stationary_start_returns_unchanged():
    sol, diag = minimize_orthogonal([np.eye(3)], lambda ws: -np.trace(ws[0]), lambda ws: [-np.eye(3)])
    assert diag.iterations == 0 and diag.converged
    np.testing.assert_array_equal(sol[0], np.eye(3))


def test_non_finite_start():
    with pytest.raises(NumericalError):
        minimize_orthogonal([np.eye(2)], lambda ws: np.nan, lambda ws: [np.zeros((2, 2))])


def test_non_orthogonal_start():
    with pytest.raises(DataError):
        minimize_orthogonal([2 * np.eye(2)], lambda ws: 0.0, lambda ws: [np.zeros((2, 2))])


def _problem(rng, r=5, D=3, c=2, n=300):
    data = whitened_views(rng, [r] * D, n)
    cfg = ObjectiveConfig(shared_count=c)
    f = lambda ws: value_and_gradient(ws, data, cfg, need_grad=False, check=False)[0] / n
    g = lambda ws: [G / n for G in value_and_gradient(ws, data, cfg, check=False)[1]]
    return f, g, data, cfg


def test_descent_orthogonality_and_determinism(rng):
    f, g, data, _ = _problem(rng)
    init = [random_orthogonal(5, rng) for _ in range(3)]
    sol, diag = minimize_orthogonal(init, f, g, OptimizerConfig(max_iterations=200))
    assert diag.max_orthogonality_error <= 1e-8
    assert all(orthogonality_error(W) <= 1e-8 for W in sol)
    trace = np.asarray(diag.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    assert trace[-1] < trace[0]
    sol2, diag2 = minimize_orthogonal(init, f, g, OptimizerConfig(max_iterations=200))
    assert all(np.array_equal(a, b) for a, b in zip(sol, sol2))
    assert diag.stop_reason in ("gradient tolerance", "max iterations", "line search failure")
    if diag.converged:
        rg = max(np.max(np.abs(riemannian_gradient(W, G))) for W, G in zip(sol, g(sol)))
        assert rg <= OptimizerConfig().gradient_tolerance


def test_right_translation_equivariance(rng):
    # with a c = 0, whitened problem, f(W Q) for the data Q^T X is the same objective
    r, D, n = 4, 2, 400
    data = whitened_views(rng, [r] * D, n)
    Q = random_orthogonal(r, rng)
    cfg = ObjectiveConfig(shared_count=1)
    init = [random_orthogonal(r, rng) for _ in range(D)]

    def make(ds):
        return (
            lambda ws: value_and_gradient(ws, ds, cfg, need_grad=False, check=False)[0] / n,
            lambda ws: [G / n for G in value_and_gradient(ws, ds, cfg, check=False)[1]],
        )

    _, da = minimize_orthogonal(init, *make(data))
    _, db = minimize_orthogonal([W @ Q for W in init], *make([Q.T @ X for X in data]))
    assert da.objective_trace[-1] == pytest.approx(db.objective_trace[-1], abs=1e-6)


def test_config_validation():
    with pytest.raises(DataError):
        OptimizerConfig(gradient_tolerance=0)
    with pytest.raises(DataError):
        OptimizerConfig(lbfgs_memory=0)
