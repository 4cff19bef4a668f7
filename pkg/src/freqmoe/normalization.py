"""Per-window, per-channel instance normalization with exact inversion.

Statistics are computed once from the raw lookback window and reused to
denormalize the accumulated forecast; everything in between runs in
normalized space. Variance is the population (1/L) variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass
class NormStats:
    """Per (batch, channel) mean and standard deviation, std >= sqrt(eps)."""

    mean: np.ndarray
    std: np.ndarray


def normalize(x: np.ndarray, eps: float = 1e-5) -> tuple[np.ndarray, NormStats]:
    """Map each (batch, channel) window to zero mean, unit variance.

    ``std = sqrt(population variance + eps)``, so constant windows map to
    zeros rather than dividing by zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[-1] < 2:
        raise InvalidInputError(f"expected (batch, channels, length>=2), got {x.shape}")
    if eps <= 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    mean = x.mean(axis=-1)
    var = x.var(axis=-1)
    std = np.sqrt(var + eps)
    out = (x - mean[:, :, None]) / std[:, :, None]
    return out, NormStats(mean=mean, std=std)


def denormalize(y: np.ndarray, stats: NormStats) -> np.ndarray:
    """Invert :func:`normalize`; ``y`` may be longer than the stats window."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 3 or y.shape[:2] != stats.mean.shape:
        raise InvalidInputError(
            f"stats shape {stats.mean.shape} does not match batch {y.shape}"
        )
    return y * stats.std[:, :, None] + stats.mean[:, :, None]


def normalize_vjp(grad_out: np.ndarray, normalized: np.ndarray, stats: NormStats) -> np.ndarray:
    """Gradient of :func:`normalize` w.r.t. its input.

    Mean and std are treated as differentiable functions of the window, so
    this is the usual centred/projected form of the norm backward pass.
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != normalized.shape:
        raise InvalidInputError(
            f"gradient shape {grad_out.shape} != output shape {normalized.shape}"
        )
    g_mean = grad_out.mean(axis=-1, keepdims=True)
    g_proj = (grad_out * normalized).mean(axis=-1, keepdims=True)
    return (grad_out - g_mean - normalized * g_proj) / stats.std[:, :, None]
