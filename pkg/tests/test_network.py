import numpy as np
import pytest

from core.exceptions import DivergedTraining, InvalidHyperparameters
from services.network import HIDDEN_UNITS, NetworkModel, NetworkParams, fit_network, init_network, loss_and_gradient


def _numerical_gradient(theta, X, y, h=1e-5):
    gradient = np.zeros_like(theta)
    for i in range(len(theta)):
        step = np.zeros_like(theta)
        step[i] = h
        up, _ = loss_and_gradient(NetworkModel.from_vector(theta + step, X.shape[1]), X, y)
        down, _ = loss_and_gradient(NetworkModel.from_vector(theta - step, X.shape[1]), X, y)
        gradient[i] = (up - down) / (2 * h)
    return gradient


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 8))
    y = rng.normal(size=12)
    n_params = HIDDEN_UNITS * 8 + 2 * HIDDEN_UNITS + 1
    for _ in range(20):
        theta = rng.uniform(-1, 1, size=n_params)
        _, analytic = loss_and_gradient(NetworkModel.from_vector(theta, 8), X, y)
        numeric = _numerical_gradient(theta, X, y)
        relative = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
        assert relative < 1e-4


def test_initialisation_is_seeded_and_bounded():
    first = init_network(8, seed=3)
    assert first.hidden_weights.shape == (4, 8)
    assert np.all(np.abs(first.to_vector()) <= 0.5)
    np.testing.assert_array_equal(first.to_vector(), init_network(8, seed=3).to_vector())
    assert not np.array_equal(first.to_vector(), init_network(8, seed=4).to_vector())


def test_vector_round_trip():
    model = init_network(8, seed=1)
    np.testing.assert_array_equal(NetworkModel.from_vector(model.to_vector(), 8).to_vector(), model.to_vector())


def test_zero_epochs_returns_initial_weights(signal_data):
    model = fit_network(signal_data.features, signal_data.labels(), NetworkParams(epochs=0), seed=2)
    np.testing.assert_array_equal(model.to_vector(), init_network(8, seed=2).to_vector())


def test_training_reduces_loss(signal_data):
    X, y = signal_data.features, signal_data.labels()
    params = NetworkParams(learning_rate=0.3, batch_size=30, epochs=40, momentum=0.2)
    before, _ = loss_and_gradient(init_network(8, seed=5), X, y)
    model = fit_network(X, y, params, seed=5)
    after, _ = loss_and_gradient(model, X, y)
    assert after < 0.5 * before
    np.testing.assert_array_equal(model.to_vector(), fit_network(X, y, params, seed=5).to_vector())


def test_divergence_is_reported(signal_data):
    X, y = signal_data.features, signal_data.labels() * 1e3
    params = NetworkParams(learning_rate=1e6, batch_size=10, epochs=50, momentum=0.9)
    with pytest.raises(DivergedTraining):
        fit_network(X, y, params, seed=0)


@pytest.mark.parametrize("params", [
    NetworkParams(learning_rate=0.0),
    NetworkParams(batch_size=0),
    NetworkParams(batch_size=301),
    NetworkParams(epochs=-1),
    NetworkParams(momentum=1.0),
])
def test_invalid_hyperparameters(params, signal_data):
    with pytest.raises(InvalidHyperparameters):
        fit_network(signal_data.features, signal_data.labels(), params, seed=0)


def test_fits_exact_linear_data():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(400, 8))
    y = X @ rng.uniform(-1, 1, size=8)
    y = (y - y.mean()) / y.std()
    params = NetworkParams(learning_rate=0.3, batch_size=20, epochs=500, momentum=0.2)
    model = fit_network(X, y, params, seed=4)
    assert float(np.mean((model.predict(X) - y) ** 2)) < 0.05
