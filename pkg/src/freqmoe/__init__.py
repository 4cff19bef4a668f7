"""Frequency-band mixture-of-experts forecasting.

The package decomposes a lookback window's spectrum into contiguous bands
with learnable boundaries, reweights them through a magnitude-driven gate,
and forecasts with residual-stacked complex-valued linear blocks. It ships
its own reverse-mode gradient engine, Adam trainer, dataset tooling, and
efficiency/attribution reporting, plus a CLI (``freqmoe``).
"""

from .errors import (CheckpointError, ConfigError, DataError, FreqMoEError,
                     InvalidInputError)
from .estimator import FreqMoEForecaster
from .model import DLinearNet, FreqMoENet, build_net
from .config import RunConfig, load_config
from .data import Dataset, SyntheticSpec, WindowSet, gen_synthetic, load_csv, make_windows, split
from .evaluation import (EfficiencyReport, GateTrace, MetricReport, count_macs,
                         count_params, evaluate, export_gate_trace)
from .training import TrainConfig, fit, grad_check, mae_loss, mse_loss

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ConfigError", "DataError", "Dataset", "DLinearNet",
    "EfficiencyReport", "FreqMoEError", "FreqMoEForecaster", "FreqMoENet",
    "GateTrace", "InvalidInputError", "MetricReport", "RunConfig", "SyntheticSpec",
    "TrainConfig", "WindowSet", "build_net", "count_macs", "count_params",
    "evaluate", "export_gate_trace", "fit", "gen_synthetic", "grad_check",
    "load_config", "load_csv", "mae_loss", "make_windows", "mse_loss", "split",
]
