"""Frequency-band mixture of experts.

The block splits the rFFT spectrum of the (normalized) input into
contiguous bands with learnable boundaries, weighs each band by a gating
network driven by the channel-averaged magnitude spectrum, and resynthesizes
the weighted spectrum back to the time domain.

Band boundaries are sigmoid-squashed scalars sorted into [0, 1]. Hard
indicator masks make the boundaries non-differentiable, so training uses a
sigmoid-product relaxation (``mask_mode="soft"``) and evaluation hardens
the boundaries back to floor-indexed bin ranges; ``mask_mode="hard"`` keeps
indicator masks everywhere (boundary gradients are then exactly zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidInputError
from . import spectral

DEFAULT_TAU = 0.02


@dataclass
class BandPartition:
    """Sorted boundaries in [0, 1] and their bin-index cuts.

    ``boundaries`` has N+1 entries with fixed endpoints 0 and 1;
    ``index_cuts`` maps them to [0, F] with the first and last forced to
    0 and F so the bands always tile the spectrum exactly.
    """

    boundaries: np.ndarray
    index_cuts: np.ndarray


@dataclass
class GateScores:
    """Per-sample expert weights on the probability simplex, shape (B, N)."""

    weights: np.ndarray


@dataclass
class MoEBlock:
    """Parameter container for one frequency-decomposition block."""

    n_experts: int
    freq_bins: int
    theta: np.ndarray
    gate_weights: np.ndarray | None = None
    gate_bias: np.ndarray | None = None
    gate_fixed: np.ndarray | None = None
    mask_mode: str = "soft"
    tau: float = DEFAULT_TAU
    gate_mode: str = "gated"

    @classmethod
    def create(cls, n_experts: int, freq_bins: int, mask_mode: str = "soft",
               tau: float = DEFAULT_TAU, gate_mode: str = "gated") -> "MoEBlock":
        if n_experts < 1:
            raise InvalidInputError(f"n_experts must be >= 1, got {n_experts}")
        if mask_mode not in ("hard", "soft"):
            raise InvalidInputError(f"unknown mask_mode {mask_mode!r}")
        if gate_mode not in ("gated", "fixed"):
            raise InvalidInputError(f"unknown gate_mode {gate_mode!r}")
        if mask_mode == "soft" and tau <= 0:
            raise InvalidInputError(f"soft-mask temperature must be positive, got {tau}")
        # Equal-width bands at init: theta_i = logit(i / N).
        fractions = np.arange(1, n_experts) / n_experts
        theta = np.log(fractions / (1.0 - fractions)) if n_experts > 1 else np.zeros(0)
        block = cls(n_experts=n_experts, freq_bins=freq_bins,
                    theta=np.ascontiguousarray(theta, dtype=np.float64),
                    mask_mode=mask_mode, tau=tau, gate_mode=gate_mode)
        if gate_mode == "gated":
            block.gate_weights = np.zeros((freq_bins, n_experts))
            block.gate_bias = np.zeros(n_experts)
        else:
            block.gate_fixed = np.zeros(n_experts)
        return block


def compute_partition(theta: np.ndarray, freq_bins: int) -> BandPartition:
    """Sigmoid, sort, and map boundary logits to bin-index cuts.

    Cuts use floor(boundary * F) clamped to [0, F]; the outer cuts are
    pinned to 0 and F regardless of rounding.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if freq_bins < 2:
        raise InvalidInputError(f"freq_bins must be >= 2, got {freq_bins}")
    interior = np.sort(expit(theta), kind="stable")
    boundaries = np.concatenate(([0.0], interior, [1.0]))
    cuts = np.clip(np.floor(boundaries * freq_bins), 0, freq_bins).astype(np.int64)
    cuts[0] = 0
    cuts[-1] = freq_bins
    return BandPartition(boundaries=boundaries, index_cuts=cuts)


def build_masks(partition: BandPartition, freq_bins: int) -> np.ndarray:
    """Indicator masks, shape (N, F); band i owns bins [cut_{i-1}, cut_i).

    Empty bands yield all-zero rows; the rows always sum to one at every
    bin index.
    """
    cuts = partition.index_cuts
    n_experts = len(cuts) - 1
    masks = np.zeros((n_experts, freq_bins))
    for i in range(n_experts):
        masks[i, cuts[i]:cuts[i + 1]] = 1.0
    return masks


def soft_masks(boundaries: np.ndarray, freq_bins: int, tau: float) -> tuple[np.ndarray, dict]:
    """Sigmoid-product band masks, renormalized to sum to one per bin.

    Band i responds with sigmoid((f/F - b_{i-1})/tau) * sigmoid((b_i - f/F)/tau).
    Returns the masks and a cache for :func:`soft_masks_vjp`.
    """
    grid = np.arange(freq_bins) / freq_bins
    left = expit((grid[None, :] - boundaries[:-1, None]) / tau)
    right = expit((boundaries[1:, None] - grid[None, :]) / tau)
    raw = left * right
    total = raw.sum(axis=0, keepdims=True)
    masks = raw / total
    cache = {"left": left, "right": right, "raw": raw, "total": total,
             "masks": masks, "tau": tau}
    return masks, cache


def soft_masks_vjp(grad_masks: np.ndarray, cache: dict) -> np.ndarray:
    """Gradient of the renormalized soft masks w.r.t. the N+1 boundaries."""
    left, right = cache["left"], cache["right"]
    raw, total, masks = cache["raw"], cache["total"], cache["masks"]
    tau = cache["tau"]
    # Undo the per-bin renormalization: masks = raw / total.
    g_raw = (grad_masks - (grad_masks * masks).sum(axis=0, keepdims=True)) / total
    d_left = left * (1.0 - left)    # sigmoid'
    d_right = right * (1.0 - right)
    # raw_i depends on b_{i-1} through `left` (slope -1/tau) and on b_i
    # through `right` (slope +1/tau).
    g_lower = (g_raw * right * d_left * (-1.0 / tau)).sum(axis=1)
    g_upper = (g_raw * left * d_right * (1.0 / tau)).sum(axis=1)
    g_bounds = np.zeros(raw.shape[0] + 1)
    g_bounds[:-1] += g_lower
    g_bounds[1:] += g_upper
    return g_bounds


def gate_input(spectrum: np.ndarray) -> np.ndarray:
    """Channel-averaged magnitude spectrum, shape (B, F)."""
    spectrum = np.asarray(spectrum)
    return np.abs(spectrum).mean(axis=1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def gate_scores(block: MoEBlock, magnitudes: np.ndarray) -> GateScores:
    """Softmax expert weights per sample.

    In ``fixed`` gate mode the learnable logit vector is broadcast to every
    row, making the weights input-independent.
    """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    if block.gate_mode == "fixed":
        row = _softmax(block.gate_fixed[None, :])
        return GateScores(weights=np.broadcast_to(row, (magnitudes.shape[0], block.n_experts)).copy())
    if magnitudes.shape[1] != block.gate_weights.shape[0]:
        raise InvalidInputError(
            f"gate expects {block.gate_weights.shape[0]} bins, got {magnitudes.shape[1]}"
        )
    logits = magnitudes @ block.gate_weights + block.gate_bias
    return GateScores(weights=_softmax(logits))


def moe_apply(block: MoEBlock, x: np.ndarray, training: bool = False) -> tuple[np.ndarray, GateScores, dict]:
    """Forward pass returning the recombined series, gate scores, and a cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidInputError(f"expected (batch, channels, length), got {x.shape}")
    length = x.shape[-1]
    if length // 2 + 1 != block.freq_bins:
        raise InvalidInputError(
            f"block configured for {block.freq_bins} bins, input length {length} "
            f"gives {length // 2 + 1}"
        )
    spectrum = spectral.rfft(x)
    partition = compute_partition(block.theta, block.freq_bins)

    soft_cache = None
    if block.mask_mode == "soft" and training:
        masks, soft_cache = soft_masks(partition.boundaries, block.freq_bins, block.tau)
    else:
        masks = build_masks(partition, block.freq_bins)

    magnitudes = gate_input(spectrum)
    scores = gate_scores(block, magnitudes)

    bin_weights = scores.weights @ masks                 # (B, F)
    weighted = bin_weights[:, None, :] * spectrum        # (B, C, F)
    out = spectral.irfft(weighted, length)

    cache = {
        "x": x, "spectrum": spectrum, "partition": partition, "masks": masks,
        "soft_cache": soft_cache, "magnitudes": magnitudes, "scores": scores.weights,
        "bin_weights": bin_weights, "length": length, "training": training,
    }
    return out, scores, cache


def moe_forward(block: MoEBlock, x: np.ndarray, training: bool = False) -> tuple[np.ndarray, GateScores]:
    """Decompose, gate, and recombine; returns the series and the gate scores."""
    out, scores, _ = moe_apply(block, x, training=training)
    return out, scores


def moe_backward(block: MoEBlock, cache: dict, grad_out: np.ndarray) -> tuple[dict, np.ndarray]:
    """Reverse-mode pass through :func:`moe_apply`.

    Returns parameter gradients (component-wise for any complex quantity)
    and the gradient w.r.t. the block input. With hard masks the boundary
    gradient is exactly zero.
    """
    spectrum = cache["spectrum"]
    masks = cache["masks"]
    scores = cache["scores"]
    bin_weights = cache["bin_weights"]
    length = cache["length"]

    g_weighted = spectral.irfft_backward(np.asarray(grad_out, dtype=np.float64))
    # weighted = bin_weights * spectrum, bin_weights real.
    g_bin_weights = (g_weighted * np.conj(spectrum)).real.sum(axis=1)
    g_spectrum = bin_weights[:, None, :] * g_weighted

    g_scores = g_bin_weights @ masks.T                   # (B, N)
    g_masks = scores.T @ g_bin_weights                   # (N, F)

    # Softmax rows: scores * (g - <g, scores>).
    inner = (g_scores * scores).sum(axis=1, keepdims=True)
    g_logits = scores * (g_scores - inner)

    grads: dict[str, np.ndarray] = {}
    if block.gate_mode == "gated":
        grads["gate_weights"] = cache["magnitudes"].T @ g_logits
        grads["gate_bias"] = g_logits.sum(axis=0)
        g_magnitudes = g_logits @ block.gate_weights.T
        mags = np.abs(spectrum)
        unit = np.zeros_like(spectrum)
        np.divide(spectrum, mags, out=unit, where=mags > 0)
        channels = spectrum.shape[1]
        g_spectrum = g_spectrum + (g_magnitudes[:, None, :] / channels) * unit
    else:
        grads["gate_fixed"] = g_logits.sum(axis=0)

    if block.mask_mode == "soft" and cache["soft_cache"] is not None:
        g_bounds = soft_masks_vjp(g_masks, cache["soft_cache"])
        # Route interior-boundary gradients back through the stable sort and
        # the sigmoid squashing.
        raw = expit(block.theta)
        order = np.argsort(raw, kind="stable")
        g_theta = np.zeros_like(block.theta)
        g_theta[order] = g_bounds[1:-1]
        grads["theta"] = g_theta * raw * (1.0 - raw)
    else:
        grads["theta"] = np.zeros_like(block.theta)

    grad_x = spectral.rfft_backward(g_spectrum, length)
    return grads, grad_x
