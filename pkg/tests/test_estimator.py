import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from freqmoe import FreqMoEForecaster
from freqmoe.errors import InvalidInputError


def make_windows(n=96, channels=2, lookback=16, horizon=8, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n + lookback + horizon)
    base = np.sin(2 * np.pi * t / 12.0)
    series = np.stack([base + 0.1 * rng.normal(size=len(t)) for _ in range(channels)])
    X = np.stack([series[:, i:i + lookback] for i in range(n)])
    y = np.stack([series[:, i + lookback:i + lookback + horizon] for i in range(n)])
    return X, y


@pytest.fixture(scope="module")
def fitted():
    X, y = make_windows()
    est = FreqMoEForecaster(lookback=16, horizon=8, n_experts=2, n_blocks=1,
                            dropout=0.2, epochs=3, batch_size=32, seed=1)
    return est.fit(X, y), X, y


def test_predict_shape(fitted):
    est, X, _ = fitted
    pred = est.predict(X[:5])
    assert pred.shape == (5, 2, 8)


def test_score_is_negative_mse(fitted):
    est, X, y = fitted
    score = est.score(X, y)
    assert score <= 0
    pred = est.predict(X)
    assert score == pytest.approx(-float(np.mean((pred - y) ** 2)))


def test_history_recorded(fitted):
    est, _, _ = fitted
    assert len(est.history_) >= 1
    assert {"epoch", "train_mse", "val_mse", "lr"} <= set(est.history_[0])


def test_unfitted_predict_raises():
    est = FreqMoEForecaster()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 1, 96)))


def test_get_params_set_params_clone():
    est = FreqMoEForecaster(n_experts=5, dropout=0.4)
    params = est.get_params()
    assert params["n_experts"] == 5
    est.set_params(n_experts=3)
    assert est.n_experts == 3
    dup = clone(est)
    assert dup.get_params()["dropout"] == 0.4


def test_explicit_validation_data():
    X, y = make_windows(n=64)
    est = FreqMoEForecaster(lookback=16, horizon=8, n_experts=0, n_blocks=1,
                            dropout=0.2, epochs=2, batch_size=32, seed=2)
    est.fit(X[:48], y[:48], validation_data=(X[48:], y[48:]))
    assert hasattr(est, "best_val_mse_")


def test_same_seed_reproducible():
    X, y = make_windows(n=48)
    preds = []
    for _ in range(2):
        est = FreqMoEForecaster(lookback=16, horizon=8, n_experts=2, n_blocks=1,
                                dropout=0.2, epochs=2, batch_size=32, seed=3)
        est.fit(X, y)
        preds.append(est.predict(X[:4]))
    np.testing.assert_array_equal(preds[0], preds[1])


def test_bad_shapes_rejected():
    est = FreqMoEForecaster(lookback=16, horizon=8)
    with pytest.raises(InvalidInputError):
        est.fit(np.zeros((4, 2, 10)), np.zeros((4, 2, 8)))
    with pytest.raises(InvalidInputError):
        est.fit(np.zeros((4, 2, 16)), np.zeros((3, 2, 8)))


def test_dlinear_architectures():
    X, y = make_windows(n=48, channels=1)
    for arch in ("dlinear", "dlinear+moe"):
        est = FreqMoEForecaster(lookback=16, horizon=8, n_experts=2, n_blocks=1,
                                dropout=0.2, epochs=2, batch_size=32, seed=4,
                                architecture=arch)
        est.fit(X, y)
        assert est.predict(X[:3]).shape == (3, 1, 8)


def test_gate_trace_from_estimator(fitted):
    est, X, _ = fitted
    trace = est.gate_trace(X[:10])
    assert trace.weights.shape == (10, 2)
    np.testing.assert_allclose(trace.weights.sum(axis=1), 1.0, atol=1e-9)
