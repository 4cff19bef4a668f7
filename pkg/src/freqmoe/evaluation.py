"""Benchmark metrics, parameter/MAC accounting, and gate attribution export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from . import moe
from .data import WindowSet

MAPE_TRUTH_FLOOR = 1e-8


@dataclass
class MetricReport:
    mse: float
    mae: float
    mape: float  # percent, over entries with |truth| > MAPE_TRUTH_FLOOR
    rmse: float
    dataset: str = ""
    horizon: int = 0
    seed: int = 0
    config_hash: str = ""

    def table(self) -> str:
        head = f"dataset={self.dataset} horizon={self.horizon} seed={self.seed} config={self.config_hash}"
        body = (f"  MSE  {self.mse:.6f}\n  MAE  {self.mae:.6f}\n"
                f"  MAPE {self.mape:.4f}%\n  RMSE {self.rmse:.6f}")
        return head + "\n" + body


def evaluate(net, windows: WindowSet, batch_size: int = 256, dataset: str = "",
             horizon: int = 0, seed: int = 0, config_hash: str = "") -> MetricReport:
    """Denormalized-space metrics over every window and channel."""
    if len(windows) == 0:
        raise InvalidInputError("cannot evaluate an empty window set")
    sq_sum = 0.0
    abs_sum = 0.0
    count = 0
    mape_sum = 0.0
    mape_count = 0
    for lo in range(0, len(windows), batch_size):
        x = windows.inputs[lo:lo + batch_size]
        truth = windows.targets[lo:lo + batch_size]
        pred = net.predict(x)
        err = pred - truth
        sq_sum += float(np.sum(err ** 2))
        abs_sum += float(np.sum(np.abs(err)))
        count += truth.size
        mask = np.abs(truth) > MAPE_TRUTH_FLOOR
        mape_sum += float(np.sum(np.abs(err[mask]) / np.abs(truth[mask])))
        mape_count += int(mask.sum())
    mse = sq_sum / count
    mape = 100.0 * mape_sum / mape_count if mape_count else 0.0
    return MetricReport(mse=mse, mae=abs_sum / count, mape=mape, rmse=float(np.sqrt(mse)),
                        dataset=dataset, horizon=horizon, seed=seed, config_hash=config_hash)


def write_metric_csv(report: MetricReport, path) -> None:
    lines = ["dataset,horizon,seed,config_hash,mse,mae,mape,rmse",
             f"{report.dataset},{report.horizon},{report.seed},{report.config_hash},"
             f"{report.mse!r},{report.mae!r},{report.mape!r},{report.rmse!r}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class EfficiencyReport:
    param_count: int          # complex weights counted once
    param_count_real: int     # same model with complex weights as two reals
    mac_count: int
    linear_macs: int
    fft_macs: int
    convention: str


def _block_shapes(lookback: int, horizon: int) -> tuple[int, int]:
    return lookback // 2 + 1, (lookback + horizon) // 2 + 1


def count_params(lookback: int, horizon: int, n_experts: int, n_blocks: int,
                 architecture: str = "freqmoe", gate_mode: str = "gated") -> EfficiencyReport:
    """Parameter counts under the complex-counted convention.

    One complex weight counts as one parameter (the convention under which
    the architecture's published sizes reproduce); the report also carries
    the doubled real-valued count.
    """
    f_in, f_out = _block_shapes(lookback, horizon)
    complex_params = 0
    real_params = 0
    if architecture in ("freqmoe",):
        per_block = f_in * f_out + f_out + f_out * f_out + f_out
        complex_params += n_blocks * per_block
    if architecture in ("dlinear", "dlinear+moe"):
        real_params += horizon * lookback + horizon
    if n_experts >= 1 and architecture != "dlinear":
        if gate_mode == "gated":
            real_params += f_in * n_experts + n_experts
        else:
            real_params += n_experts
        real_params += n_experts - 1  # boundary logits
    return EfficiencyReport(
        param_count=complex_params + real_params,
        param_count_real=2 * complex_params + real_params,
        mac_count=0, linear_macs=0, fft_macs=0,
        convention="complex weights counted once; real-valued count doubles them",
    )


def count_macs(lookback: int, horizon: int, n_experts: int, n_blocks: int,
               channels: int, architecture: str = "freqmoe") -> EfficiencyReport:
    """Complex multiply-accumulates per forecast window.

    Convention: both linear layers count F_in*F_out and F_out^2 complex MACs
    per channel per block; every forward or inverse transform costs
    0.5 * L * log2(L) complex MACs per channel; gating and masking
    elementwise work is excluded.
    """
    if channels < 0:
        raise InvalidInputError(f"channels must be >= 0, got {channels}")
    f_in, f_out = _block_shapes(lookback, horizon)
    out_len = lookback + horizon

    def fft_cost(length: int) -> float:
        return 0.5 * length * np.log2(length)

    linear = 0
    fft = 0.0
    if architecture == "freqmoe":
        linear += n_blocks * channels * (f_in * f_out + f_out * f_out)
        fft += n_blocks * channels * (fft_cost(lookback) + fft_cost(out_len))
    else:
        linear += channels * lookback * horizon
    if n_experts >= 1 and architecture != "dlinear":
        fft += channels * 2 * fft_cost(lookback)
    convention = ("complex MACs; linears F_in*F_out + F_out^2 per channel per block; "
                  "FFTs 0.5*L*log2(L) per transform per channel; gate/mask elementwise "
                  "ops excluded")
    fft_int = int(round(fft))
    return EfficiencyReport(param_count=0, param_count_real=0,
                            mac_count=linear + fft_int, linear_macs=linear,
                            fft_macs=fft_int, convention=convention)


@dataclass
class GateTrace:
    weights: np.ndarray      # (n_windows, N)
    boundaries: np.ndarray   # (N+1,)
    bandwidths: np.ndarray   # (N,)
    mean_coeffs: np.ndarray  # (N,)


def gate_trace(net, windows: WindowSet, batch_size: int = 256) -> GateTrace:
    """Evaluation-mode gate scores over a window set plus band statistics."""
    if net.moe_block is None:
        raise InvalidInputError("model has no MoE block to trace")
    rows = []
    for lo in range(0, len(windows), batch_size):
        rows.append(net.gate_weights_for(windows.inputs[lo:lo + batch_size]))
    weights = np.concatenate(rows, axis=0)
    partition = moe.compute_partition(net.moe_block.theta, net.moe_block.freq_bins)
    boundaries = partition.boundaries
    bandwidths = np.diff(boundaries)
    return GateTrace(weights=weights, boundaries=boundaries, bandwidths=bandwidths,
                     mean_coeffs=weights.mean(axis=0))


def export_gate_trace(net, windows: WindowSet, out_path) -> GateTrace:
    """Write the per-window gate matrix plus boundary/bandwidth footer rows."""
    trace = gate_trace(net, windows)
    n_experts = trace.weights.shape[1]
    path = Path(out_path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["window_index"] + [f"expert_{i}" for i in range(n_experts)])
        for i, row in enumerate(trace.weights):
            writer.writerow([i] + [repr(float(v)) for v in row])
        for i, b in enumerate(trace.boundaries):
            writer.writerow([f"boundary_{i}", repr(float(b))])
        for i, w in enumerate(trace.bandwidths):
            writer.writerow([f"bandwidth_{i}", repr(float(w))])
        for i, c in enumerate(trace.mean_coeffs):
            writer.writerow([f"mean_coeff_{i}", repr(float(c))])
    return trace
