"""Residual-stacked frequency-domain prediction blocks.

Each block takes a length-s residual series, maps its spectrum through two
complex linear layers (with a split complex ReLU and joint complex dropout
between them), inverts to a length s_out = s + p series, and rescales the
amplitude by s_out/s to compensate for the length change. The first s
output steps reconstruct the lookback; the last p steps are the block's
forecast contribution. Stacking subtracts each reconstruction from the
running residual and sums the forecast tails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from . import spectral


@dataclass
class ComplexLinear:
    """Dense complex map: out = weights @ z + bias."""

    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def create(cls, out_dim: int, in_dim: int, rng: np.random.Generator) -> "ComplexLinear":
        # Fan-in scaled uniform init on both components keeps spectra O(1).
        bound = 1.0 / np.sqrt(in_dim)
        re = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        im = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        weights = np.ascontiguousarray(re + 1j * im)
        bias = np.zeros(out_dim, dtype=np.complex128)
        return cls(weights=weights, bias=bias)


def complex_linear_apply(layer: ComplexLinear, z: np.ndarray) -> np.ndarray:
    """Apply the layer along the last axis with full complex multiplication."""
    z = np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != layer.weights.shape[1]:
        raise InvalidInputError(
            f"layer expects {layer.weights.shape[1]} inputs, got {z.shape[-1]}"
        )
    return z @ layer.weights.T + layer.bias


def complex_linear_vjp(layer: ComplexLinear, z: np.ndarray, grad_out: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Component-wise gradients (d/dRe + 1j*d/dIm) for weights, bias, input."""
    flat_g = grad_out.reshape(-1, grad_out.shape[-1])
    flat_z = z.reshape(-1, z.shape[-1])
    g_weights = flat_g.T @ np.conj(flat_z)
    g_bias = flat_g.sum(axis=0)
    g_z = grad_out @ np.conj(layer.weights)
    return g_weights, g_bias, g_z


def complex_relu(z: np.ndarray) -> np.ndarray:
    """Rectify real and imaginary parts independently."""
    z = np.asarray(z, dtype=np.complex128)
    return np.maximum(z.real, 0.0) + 1j * np.maximum(z.imag, 0.0)


def complex_relu_vjp(z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out.real * (z.real > 0) + 1j * (grad_out.imag * (z.imag > 0))


def complex_dropout(z: np.ndarray, rate: float, training: bool,
                    rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Zero whole complex elements with probability ``rate``; scale survivors.

    Real and imaginary parts are dropped jointly so surviving elements keep
    their phase. Identity in evaluation mode or at rate 0. Returns the
    output and the mask applied (None when inactive).
    """
    if not 0.0 <= rate < 1.0:
        raise InvalidInputError(f"dropout rate must be in [0, 1), got {rate}")
    z = np.asarray(z, dtype=np.complex128)
    if not training or rate == 0.0:
        return z, None
    if rng is None:
        raise InvalidInputError("training-mode dropout needs a random generator")
    keep = rng.random(z.shape) >= rate
    mask = keep / (1.0 - rate)
    return z * mask, mask


@dataclass
class PredictionBlock:
    """Two complex linear layers mapping F_in = s//2+1 bins to F_out = (s+p)//2+1."""

    up1: ComplexLinear
    up2: ComplexLinear
    dropout_rate: float
    input_length: int
    output_length: int

    @classmethod
    def create(cls, input_length: int, output_length: int, dropout_rate: float,
               rng: np.random.Generator) -> "PredictionBlock":
        if output_length <= input_length:
            raise InvalidInputError(
                f"output length {output_length} must exceed input length {input_length}"
            )
        f_in = input_length // 2 + 1
        f_out = output_length // 2 + 1
        return cls(up1=ComplexLinear.create(f_out, f_in, rng),
                   up2=ComplexLinear.create(f_out, f_out, rng),
                   dropout_rate=dropout_rate,
                   input_length=input_length, output_length=output_length)


def block_apply(block: PredictionBlock, r: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None,
                use_activation: bool = True) -> tuple[np.ndarray, dict]:
    """Forward pass with cache; ``use_activation=False`` is a linearity test hook."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != block.input_length:
        raise InvalidInputError(
            f"block expects length {block.input_length}, got {r.shape[-1]}"
        )
    spectrum_in = spectral.rfft(r)
    hidden = complex_linear_apply(block.up1, spectrum_in)
    activated = complex_relu(hidden) if use_activation else hidden
    dropped, mask = complex_dropout(activated, block.dropout_rate, training, rng)
    spectrum_out = complex_linear_apply(block.up2, dropped)
    scale = block.output_length / block.input_length
    out = spectral.irfft(spectrum_out, block.output_length) * scale
    cache = {"spectrum_in": spectrum_in, "hidden": hidden, "dropped": dropped,
             "mask": mask, "scale": scale, "use_activation": use_activation}
    return out, cache


def block_forward(block: PredictionBlock, r: np.ndarray, training: bool = False,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Length-s residual in, length-s_out reconstruction-plus-forecast out."""
    out, _ = block_apply(block, r, training=training, rng=rng)
    return out


def block_backward(block: PredictionBlock, cache: dict, grad_out: np.ndarray
                   ) -> tuple[dict, np.ndarray]:
    """Reverse-mode pass; returns per-layer parameter gradients and d(loss)/dr."""
    g_spectrum_out = spectral.irfft_backward(
        np.asarray(grad_out, dtype=np.float64) * cache["scale"]
    )
    g_w2, g_b2, g_dropped = complex_linear_vjp(block.up2, cache["dropped"], g_spectrum_out)
    if cache["mask"] is not None:
        g_dropped = g_dropped * cache["mask"]
    if cache["use_activation"]:
        g_hidden = complex_relu_vjp(cache["hidden"], g_dropped)
    else:
        g_hidden = g_dropped
    g_w1, g_b1, g_spectrum_in = complex_linear_vjp(block.up1, cache["spectrum_in"], g_hidden)
    grad_r = spectral.rfft_backward(g_spectrum_in, block.input_length)
    grads = {"up1.weights": g_w1, "up1.bias": g_b1,
             "up2.weights": g_w2, "up2.bias": g_b2}
    return grads, grad_r


@dataclass
class PredictorStack:
    """Residually connected prediction blocks sharing (s, s_out)."""

    blocks: list[PredictionBlock]
    lookback: int
    horizon: int
    use_activation: bool = True  # test hook; production always True

    @classmethod
    def create(cls, n_blocks: int, lookback: int, horizon: int, dropout_rate: float,
               rng: np.random.Generator) -> "PredictorStack":
        if n_blocks < 1:
            raise InvalidInputError(f"need at least one block, got {n_blocks}")
        blocks = [PredictionBlock.create(lookback, lookback + horizon, dropout_rate, rng)
                  for _ in range(n_blocks)]
        return cls(blocks=blocks, lookback=lookback, horizon=horizon)


def stack_apply(stack: PredictorStack, r0: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, list[np.ndarray], list[dict]]:
    """Run the residual cascade; returns (forecast, reconstructions, caches)."""
    r = np.asarray(r0, dtype=np.float64)
    if r.shape[-1] != stack.lookback:
        raise InvalidInputError(f"expected lookback {stack.lookback}, got {r.shape[-1]}")
    s = stack.lookback
    forecast = np.zeros(r.shape[:-1] + (stack.horizon,))
    reconstructions = []
    caches = []
    for block in stack.blocks:
        y, cache = block_apply(block, r, training=training, rng=rng,
                               use_activation=stack.use_activation)
        reconstructions.append(y[..., :s])
        forecast = forecast + y[..., s:]
        r = r - y[..., :s]
        caches.append(cache)
    return forecast, reconstructions, caches


def stack_forward(stack: PredictorStack, r0: np.ndarray, training: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forecast of length p plus the per-block lookback reconstructions."""
    forecast, reconstructions, _ = stack_apply(stack, r0, training=training, rng=rng)
    return forecast, reconstructions


def stack_backward(stack: PredictorStack, caches: list[dict], grad_forecast: np.ndarray
                   ) -> tuple[list[dict], np.ndarray]:
    """Reverse the cascade: returns per-block gradients and d(loss)/dr0.

    Each block's output tail feeds the summed forecast while its head is
    subtracted from the residual consumed by later blocks.
    """
    s = stack.lookback
    grad_forecast = np.asarray(grad_forecast, dtype=np.float64)
    grad_r = np.zeros(grad_forecast.shape[:-1] + (s,))
    per_block: list[dict] = [None] * len(stack.blocks)  # type: ignore[list-item]
    for i in range(len(stack.blocks) - 1, -1, -1):
        g_y = np.concatenate([-grad_r, grad_forecast], axis=-1)
        grads, g_r_in = block_backward(stack.blocks[i], caches[i], g_y)
        per_block[i] = grads
        grad_r = grad_r + g_r_in
    return per_block, grad_r
