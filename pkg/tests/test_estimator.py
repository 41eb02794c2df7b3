from dataclasses import replace

import numpy as np
import pytest

from shindica import FitConfig, SimulationConfig, amari_distance, extract_shared, fit, mcc, simulate, transform
from shindica.datamodel import DataError, MultiViewDataset
from shindica.estimator import reconstruct
from shindica.objective import ObjectiveConfig, evaluate
from shindica.whitening import apply_whitening


@pytest.fixture(scope="module")
def fitted():
    data, truth = simulate(SimulationConfig(n_views=2, sources_per_view=8, shared_count=5, samples=1000, seed=0))
    return data, truth, fit(data, 5)


def test_recovers_mixing(fitted):
    _, truth, model = fitted
    for A_hat, A in zip(model.mixing_estimates, truth.mixing):
        assert amari_distance(A_hat, A, normalize=True) < 0.1
    assert model.converged


def test_shared_sources_recovered(fitted):
    data, truth, model = fitted
    assert mcc(extract_shared(model, data), truth.shared_sources)[0] > 0.95


def test_objective_trace_non_increasing(fitted):
    trace = np.asarray(fitted[2].objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1]))


def test_deterministic(fitted):
    data, _, model = fitted
    again = fit(data, 5)
    assert all(np.array_equal(a, b) for a, b in zip(model.unmixing_whitened, again.unmixing_whitened))


def test_transform_matches_final_state(fitted):
    data, _, model = fitted
    Xw = [apply_whitening(t, X) for t, X in zip(model.whitening, data.views)]
    value, est = evaluate(list(model.unmixing_whitened), Xw, ObjectiveConfig(shared_count=5))
    assert value == pytest.approx(model.objective_trace[-1], rel=1e-12)
    for a, b in zip(est.z, transform(model, data).z):
        np.testing.assert_array_equal(a, b)


def test_transform_empty_and_reconstruct(fitted):
    data, _, model = fitted
    empty = transform(model, [np.zeros((8, 0)), np.zeros((8, 0))])
    assert all(z.shape == (8, 0) for z in empty.z)
    rec = reconstruct(model, transform(model, data))
    for X, R in zip(data.views, rec):
        np.testing.assert_allclose(R, X, atol=1e-8)


def test_extract_shared_identical_views():
    rng = np.random.default_rng(2)
    X = rng.laplace(size=(4, 300))
    data = MultiViewDataset((X, X.copy(), X.copy()))
    model = fit(data, 2)
    W = model.unmixing_whitened[0]
    model = replace(model, unmixing_whitened=(W, W, W))
    est = transform(model, data)
    np.testing.assert_allclose(extract_shared(model, data), est.z_shared[0], atol=1e-12)


def test_zero_shared():
    data, _ = simulate(SimulationConfig(n_views=2, sources_per_view=4, shared_count=0, samples=400, seed=1))
    model = fit(data, 0)
    assert extract_shared(model, data).shape == (0, 400)


def test_gauss_nonlinearity_fits():
    data, truth = simulate(SimulationConfig(n_views=2, sources_per_view=5, shared_count=3, samples=2000, seed=3))
    model = fit(data, 3, FitConfig(nonlinearity="gauss"))
    assert model.nonlinearity == "gauss"
    assert mcc(extract_shared(model, data), truth.shared_sources)[0] > 0.95


def test_errors():
    data, _ = simulate(SimulationConfig(n_views=2, sources_per_view=4, shared_count=2, samples=100, seed=1))
    with pytest.raises(DataError):
        fit(data, 5)
    with pytest.raises(DataError):
        fit(MultiViewDataset((data.views[0],)), 1)
    model = fit(data, 2)
    with pytest.raises(DataError):
        transform(model, [np.zeros((3, 5)), np.zeros((4, 5))])
