"""Complete forecasting networks and their reverse-mode gradient passes.

Two architectures share one interface (``forward``/``backward``/``predict``
plus a ``param_set``):

* :class:`FreqMoENet` — instance norm, optional frequency-band MoE front
  end, residual stack of spectral prediction blocks.
* :class:`DLinearNet` — instance norm, optional MoE front end, and a single
  real linear layer per channel (weights shared across channels). This is
  the minimal linear baseline used to measure the MoE block's value as a
  detachable plugin.

``forward`` returns the normalized-space forecast and a cache;
``backward`` walks the cache in reverse and returns component-wise
gradients for every learnable array. ``predict`` runs in evaluation mode
and denormalizes.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from . import moe, predictor
from .normalization import denormalize, normalize
from .params import ParamSet

ARCHITECTURES = ("freqmoe", "dlinear", "dlinear+moe")


def _check_input(x: np.ndarray, lookback: int, channels: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidInputError(f"expected (batch, channels, length), got shape {x.shape}")
    if x.shape[1] != channels:
        raise InvalidInputError(f"model built for {channels} channels, got {x.shape[1]}")
    if x.shape[2] != lookback:
        raise InvalidInputError(f"model built for lookback {lookback}, got {x.shape[2]}")
    if not np.isfinite(x).all():
        raise InvalidInputError("input contains non-finite values")
    return x


class FreqMoENet:
    def __init__(self, channels: int, lookback: int, horizon: int, n_experts: int,
                 n_blocks: int, dropout: float, mask_mode: str = "soft",
                 tau: float = moe.DEFAULT_TAU, gate_mode: str = "gated",
                 eps: float = 1e-5, rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        if lookback < 2 or horizon < 1:
            raise InvalidInputError(
                f"need lookback >= 2 and horizon >= 1, got {lookback}/{horizon}"
            )
        self.channels = channels
        self.lookback = lookback
        self.horizon = horizon
        self.n_experts = n_experts
        self.eps = eps
        freq_bins = lookback // 2 + 1
        # n_experts == 0 bypasses the MoE front end entirely.
        self.moe_block = (moe.MoEBlock.create(n_experts, freq_bins, mask_mode, tau, gate_mode)
                          if n_experts >= 1 else None)
        self.stack = predictor.PredictorStack.create(n_blocks, lookback, horizon, dropout, rng)
        self.param_set = ParamSet(self._named_params())

    def _named_params(self) -> list[tuple[str, np.ndarray]]:
        items: list[tuple[str, np.ndarray]] = []
        if self.moe_block is not None:
            items.append(("moe.theta", self.moe_block.theta))
            if self.moe_block.gate_mode == "gated":
                items.append(("moe.gate.weights", self.moe_block.gate_weights))
                items.append(("moe.gate.bias", self.moe_block.gate_bias))
            else:
                items.append(("moe.gate.fixed_logits", self.moe_block.gate_fixed))
        for i, block in enumerate(self.stack.blocks):
            items.append((f"stack.{i}.up1.weights", block.up1.weights))
            items.append((f"stack.{i}.up1.bias", block.up1.bias))
            items.append((f"stack.{i}.up2.weights", block.up2.weights))
            items.append((f"stack.{i}.up2.bias", block.up2.bias))
        return items

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, dict]:
        x = _check_input(x, self.lookback, self.channels)
        x_norm, stats = normalize(x, self.eps)
        cache: dict = {"stats": stats}
        if self.moe_block is not None:
            r0, scores, moe_cache = moe.moe_apply(self.moe_block, x_norm, training=training)
            cache["moe"] = moe_cache
            cache["gates"] = scores
        else:
            r0 = x_norm
        forecast, _, block_caches = predictor.stack_apply(self.stack, r0, training=training, rng=rng)
        cache["blocks"] = block_caches
        return forecast, cache

    def backward(self, cache: dict, grad_forecast: np.ndarray) -> dict[str, np.ndarray]:
        per_block, grad_r0 = predictor.stack_backward(self.stack, cache["blocks"], grad_forecast)
        grads: dict[str, np.ndarray] = {}
        for i, block_grads in enumerate(per_block):
            for key, value in block_grads.items():
                grads[f"stack.{i}.{key}"] = value
        if self.moe_block is not None:
            moe_grads, _ = moe.moe_backward(self.moe_block, cache["moe"], grad_r0)
            grads["moe.theta"] = moe_grads["theta"]
            if self.moe_block.gate_mode == "gated":
                grads["moe.gate.weights"] = moe_grads["gate_weights"]
                grads["moe.gate.bias"] = moe_grads["gate_bias"]
            else:
                grads["moe.gate.fixed_logits"] = moe_grads["gate_fixed"]
        return grads

    def predict(self, x: np.ndarray) -> np.ndarray:
        forecast_norm, cache = self.forward(x, training=False)
        return denormalize(forecast_norm, cache["stats"])

    def gate_weights_for(self, x: np.ndarray) -> np.ndarray:
        """Evaluation-mode gate scores, shape (batch, n_experts)."""
        if self.moe_block is None:
            raise InvalidInputError("model has no MoE block (n_experts = 0)")
        _, cache = self.forward(x, training=False)
        return cache["gates"].weights


class DLinearNet:
    """Per-channel linear map from lookback to horizon, shared across channels."""

    def __init__(self, channels: int, lookback: int, horizon: int,
                 n_experts: int = 0, mask_mode: str = "soft",
                 tau: float = moe.DEFAULT_TAU, gate_mode: str = "gated",
                 eps: float = 1e-5, rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.channels = channels
        self.lookback = lookback
        self.horizon = horizon
        self.n_experts = n_experts
        self.eps = eps
        freq_bins = lookback // 2 + 1
        self.moe_block = (moe.MoEBlock.create(n_experts, freq_bins, mask_mode, tau, gate_mode)
                          if n_experts >= 1 else None)
        bound = 1.0 / np.sqrt(lookback)
        self.weights = rng.uniform(-bound, bound, size=(horizon, lookback))
        self.bias = np.zeros(horizon)
        self.param_set = ParamSet(self._named_params())

    def _named_params(self) -> list[tuple[str, np.ndarray]]:
        items: list[tuple[str, np.ndarray]] = []
        if self.moe_block is not None:
            items.append(("moe.theta", self.moe_block.theta))
            if self.moe_block.gate_mode == "gated":
                items.append(("moe.gate.weights", self.moe_block.gate_weights))
                items.append(("moe.gate.bias", self.moe_block.gate_bias))
            else:
                items.append(("moe.gate.fixed_logits", self.moe_block.gate_fixed))
        items.append(("head.weights", self.weights))
        items.append(("head.bias", self.bias))
        return items

    def forward(self, x: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, dict]:
        x = _check_input(x, self.lookback, self.channels)
        x_norm, stats = normalize(x, self.eps)
        cache: dict = {"stats": stats}
        if self.moe_block is not None:
            r0, scores, moe_cache = moe.moe_apply(self.moe_block, x_norm, training=training)
            cache["moe"] = moe_cache
            cache["gates"] = scores
        else:
            r0 = x_norm
        cache["head_in"] = r0
        forecast = r0 @ self.weights.T + self.bias
        return forecast, cache

    def backward(self, cache: dict, grad_forecast: np.ndarray) -> dict[str, np.ndarray]:
        head_in = cache["head_in"]
        flat_g = grad_forecast.reshape(-1, self.horizon)
        flat_in = head_in.reshape(-1, self.lookback)
        grads: dict[str, np.ndarray] = {
            "head.weights": flat_g.T @ flat_in,
            "head.bias": flat_g.sum(axis=0),
        }
        if self.moe_block is not None:
            grad_r0 = grad_forecast @ self.weights
            moe_grads, _ = moe.moe_backward(self.moe_block, cache["moe"], grad_r0)
            grads["moe.theta"] = moe_grads["theta"]
            if self.moe_block.gate_mode == "gated":
                grads["moe.gate.weights"] = moe_grads["gate_weights"]
                grads["moe.gate.bias"] = moe_grads["gate_bias"]
            else:
                grads["moe.gate.fixed_logits"] = moe_grads["gate_fixed"]
        return grads

    def predict(self, x: np.ndarray) -> np.ndarray:
        forecast_norm, cache = self.forward(x, training=False)
        return denormalize(forecast_norm, cache["stats"])

    def gate_weights_for(self, x: np.ndarray) -> np.ndarray:
        if self.moe_block is None:
            raise InvalidInputError("model has no MoE block")
        _, cache = self.forward(x, training=False)
        return cache["gates"].weights


def build_net(architecture: str, channels: int, lookback: int, horizon: int,
              n_experts: int, n_blocks: int, dropout: float, mask_mode: str = "soft",
              tau: float = moe.DEFAULT_TAU, gate_mode: str = "gated", eps: float = 1e-5,
              rng: np.random.Generator | None = None):
    if architecture == "freqmoe":
        return FreqMoENet(channels, lookback, horizon, n_experts, n_blocks, dropout,
                          mask_mode, tau, gate_mode, eps, rng)
    if architecture == "dlinear":
        return DLinearNet(channels, lookback, horizon, 0, mask_mode, tau, gate_mode, eps, rng)
    if architecture == "dlinear+moe":
        if n_experts < 1:
            raise InvalidInputError("dlinear+moe needs n_experts >= 1")
        return DLinearNet(channels, lookback, horizon, n_experts, mask_mode, tau,
                          gate_mode, eps, rng)
    raise InvalidInputError(f"unknown architecture {architecture!r}; choose from {ARCHITECTURES}")
