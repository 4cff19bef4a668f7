"""Scikit-learn style estimator wrapping the forecasting networks.

``X`` is an array of lookback windows with shape (n_windows, channels,
lookback) and ``y`` the matching horizon windows (n_windows, channels,
horizon). The estimator follows the usual conventions — hyperparameters in
``__init__``, fitted state in trailing-underscore attributes,
``get_params``/``set_params`` via :class:`sklearn.base.BaseEstimator` — so
it composes with `clone`, pipelines, and model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import InvalidInputError
from .evaluation import GateTrace, gate_trace
from .data import WindowSet
from .model import build_net
from .training import TrainConfig, fit, substream, validation_mse


def check_windows(X, name: str = "X", length: int | None = None,
                  channels: int | None = None) -> np.ndarray:
    """Validate a (n_windows, channels, length) float array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise InvalidInputError(f"{name} must be 3-d (windows, channels, length), got {X.shape}")
    if not np.isfinite(X).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    if length is not None and X.shape[2] != length:
        raise InvalidInputError(f"{name} has length {X.shape[2]}, expected {length}")
    if channels is not None and X.shape[1] != channels:
        raise InvalidInputError(f"{name} has {X.shape[1]} channels, expected {channels}")
    return X


class FreqMoEForecaster(BaseEstimator):
    """Frequency-band mixture-of-experts forecaster with residual spectral blocks.

    Parameters mirror the run configuration: ``architecture`` selects the
    full model (``"freqmoe"``), the plain linear baseline (``"dlinear"``)
    or the baseline with the band-mixture front end (``"dlinear+moe"``);
    ``n_experts=0`` drops the front end from ``"freqmoe"``.
    """

    def __init__(self, lookback: int = 96, horizon: int = 96, n_experts: int = 3,
                 n_blocks: int = 3, dropout: float = 0.3, mask_mode: str = "soft",
                 tau: float = 0.02, gate_mode: str = "gated",
                 architecture: str = "freqmoe", eps: float = 1e-5,
                 lr0: float = 0.001, epochs: int = 40, patience: int = 6,
                 batch_size: int = 32, validation_fraction: float = 0.2,
                 seed: int = 0):
        self.lookback = lookback
        self.horizon = horizon
        self.n_experts = n_experts
        self.n_blocks = n_blocks
        self.dropout = dropout
        self.mask_mode = mask_mode
        self.tau = tau
        self.gate_mode = gate_mode
        self.architecture = architecture
        self.eps = eps
        self.lr0 = lr0
        self.epochs = epochs
        self.patience = patience
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.seed = seed

    def fit(self, X, y, validation_data=None):
        X = check_windows(X, "X", length=self.lookback)
        y = check_windows(y, "y", length=self.horizon, channels=X.shape[1])
        if len(X) != len(y):
            raise InvalidInputError(f"X has {len(X)} windows, y has {len(y)}")
        if validation_data is not None:
            X_val, y_val = validation_data
            X_val = check_windows(X_val, "X_val", length=self.lookback, channels=X.shape[1])
            y_val = check_windows(y_val, "y_val", length=self.horizon, channels=X.shape[1])
            X_train, y_train = X, y
        else:
            # Chronological tail holdout for early stopping.
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            if n_val >= len(X):
                raise InvalidInputError("not enough windows to hold out a validation split")
            X_train, y_train = X[:-n_val], y[:-n_val]
            X_val, y_val = X[-n_val:], y[-n_val:]
        self.n_channels_ = X.shape[1]
        self.net_ = build_net(self.architecture, self.n_channels_, self.lookback,
                              self.horizon, self.n_experts, self.n_blocks, self.dropout,
                              self.mask_mode, self.tau, self.gate_mode, self.eps,
                              rng=substream(self.seed, "init"))
        cfg = TrainConfig(epochs=self.epochs, patience=self.patience, lr0=self.lr0,
                          batch_size=self.batch_size, seed=self.seed)
        self.history_ = fit(self.net_, X_train, y_train, X_val, y_val, cfg)
        self.best_val_mse_ = min(row["val_mse"] for row in self.history_)
        return self

    def _require_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("this forecaster is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_windows(X, "X", length=self.lookback, channels=self.n_channels_)
        out = []
        for lo in range(0, len(X), 256):
            out.append(self.net_.predict(X[lo:lo + 256]))
        return np.concatenate(out, axis=0)

    def score(self, X, y) -> float:
        """Negative denormalized MSE (larger is better, sklearn convention)."""
        self._require_fitted()
        X = check_windows(X, "X", length=self.lookback, channels=self.n_channels_)
        y = check_windows(y, "y", length=self.horizon, channels=self.n_channels_)
        return -validation_mse(self.net_, X, y)

    def gate_trace(self, X) -> GateTrace:
        """Per-window expert weights plus learned band statistics."""
        self._require_fitted()
        X = check_windows(X, "X", length=self.lookback, channels=self.n_channels_)
        windows = WindowSet(inputs=X, targets=np.zeros((len(X), X.shape[1], 0)),
                            starts=np.arange(len(X)))
        return gate_trace(self.net_, windows)
