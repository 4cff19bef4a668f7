"""Dataset loading, chronological splitting, windowing, and synthetic data.

CSV files follow the common forecasting-benchmark layout: a header row, a
timestamp first column (kept only as labels), and one numeric column per
channel. Splits are contiguous chronological ranges; windows never cross a
split boundary, so no future information leaks into training.

The synthetic generator produces a single-channel signal of alternating
500-step segments in which either a 0.05 Hz or a 0.4 Hz sinusoid dominates
(amplitude 1.0) while the other acts as structured noise (amplitude 0.3),
plus Gaussian noise. A second column records each step's segment parity so
tests and attribution tooling can label windows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, InvalidInputError
from .training import substream

PARITY_CHANNEL = "segment_parity"


@dataclass
class Dataset:
    name: str
    channel_names: list[str]
    values: np.ndarray  # (T, C)
    frequency: str = ""

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


@dataclass
class WindowSet:
    inputs: np.ndarray   # (n, C, lookback)
    targets: np.ndarray  # (n, C, horizon)
    starts: np.ndarray   # window start indices in the source series
    split: str = ""

    def __len__(self) -> int:
        return self.inputs.shape[0]


def load_csv(path) -> Dataset:
    """Read every numeric column after the timestamp column; rejects gaps."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a timestamp column plus at least one channel")
        channel_names = [name.strip() for name in header[1:]]
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for col, cell in zip(channel_names, row[1:]):
                text = cell.strip()
                if not text:
                    raise DataError(f"{path}: blank cell at row {line_no}, column {col!r}")
                try:
                    value = float(text)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {text!r} at row {line_no}, column {col!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataError(f"{path}: non-finite value at row {line_no}, column {col!r}")
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(name=path.stem, channel_names=channel_names,
                   values=np.asarray(rows, dtype=np.float64))


def drop_channels(ds: Dataset, names: list[str]) -> Dataset:
    """Dataset without the listed channels (e.g. the synthetic parity label)."""
    keep = [i for i, n in enumerate(ds.channel_names) if n not in names]
    return Dataset(name=ds.name, channel_names=[ds.channel_names[i] for i in keep],
                   values=ds.values[:, keep], frequency=ds.frequency)


def default_ratios(name: str) -> tuple[float, float, float]:
    """6:2:2 for ETTh/PEMS-style datasets, 7:2:1 otherwise."""
    lowered = name.lower()
    if lowered.startswith("etth") or lowered.startswith("pems"):
        return (0.6, 0.2, 0.2)
    return (0.7, 0.2, 0.1)


def split(ds: Dataset, ratios: tuple[float, float, float],
          min_length: int | None = None) -> tuple[range, range, range]:
    """Contiguous chronological ranges; the test range absorbs rounding."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidInputError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidInputError(f"ratios must sum to 1, got {sum(ratios)}")
    total = ds.length
    cut1 = int(np.floor(ratios[0] * total))
    cut2 = int(np.floor((ratios[0] + ratios[1]) * total))
    ranges = (range(0, cut1), range(cut1, cut2), range(cut2, total))
    if min_length is not None:
        for label, rng_ in zip(("train", "val", "test"), ranges):
            if len(rng_) < min_length:
                raise ConfigError(
                    f"{label} split has {len(rng_)} steps, need at least {min_length}"
                )
    return ranges


def make_windows(ds: Dataset, index_range: range, lookback: int = 96,
                 horizon: int = 96, split_name: str = "") -> WindowSet:
    """Every stride-1 window fully inside the range, as (C, L) input/target pairs."""
    span = lookback + horizon
    if len(index_range) < span:
        raise ConfigError(
            f"range of {len(index_range)} steps cannot fit lookback {lookback} + horizon {horizon}"
        )
    starts = np.arange(index_range.start, index_range.stop - span + 1)
    series = ds.values.T  # (C, T)
    inputs = np.stack([series[:, t:t + lookback] for t in starts])
    targets = np.stack([series[:, t + lookback:t + span] for t in starts])
    return WindowSet(inputs=inputs, targets=targets, starts=starts, split=split_name)


def standardize(ds: Dataset, train_range: range) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Scale every channel by its train-split mean/std (benchmark convention)."""
    if len(train_range) < 2:
        raise InvalidInputError("train range too short to estimate statistics")
    segment = ds.values[train_range.start:train_range.stop]
    mean = segment.mean(axis=0)
    std = segment.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    scaled = (ds.values - mean) / std
    out = Dataset(name=ds.name, channel_names=list(ds.channel_names),
                  values=scaled, frequency=ds.frequency)
    return out, mean, std


@dataclass
class SyntheticSpec:
    total_steps: int = 10_000
    segment_length: int = 500
    n_segments: int = 20
    f_low: float = 0.05
    f_high: float = 0.4
    amp_main: float = 1.0
    amp_noise: float = 0.3
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.total_steps != self.segment_length * self.n_segments:
            raise InvalidInputError("total_steps must equal segment_length * n_segments")
        for f in (self.f_low, self.f_high):
            if not 0.0 < f < 0.5:
                raise InvalidInputError(f"frequencies must lie in (0, 0.5), got {f}")


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Alternating dominant-frequency segments with a global time index.

    Even segments are low-frequency dominant, odd segments high-frequency
    dominant; the phase runs continuously across segment switches.
    """
    t = np.arange(spec.total_steps, dtype=np.float64)
    segment = (t // spec.segment_length).astype(np.int64)
    parity = segment % 2
    f_main = np.where(parity == 0, spec.f_low, spec.f_high)
    f_noise = np.where(parity == 0, spec.f_high, spec.f_low)
    signal = (spec.amp_main * np.sin(2 * np.pi * f_main * t)
              + spec.amp_noise * np.sin(2 * np.pi * f_noise * t))
    if spec.noise_sigma > 0:
        rng = substream(spec.seed, "synthetic-noise")
        signal = signal + rng.normal(0.0, spec.noise_sigma, size=spec.total_steps)
    values = np.column_stack([signal, parity.astype(np.float64)])
    return Dataset(name="synthetic", channel_names=["value", PARITY_CHANNEL],
                   values=values, frequency="step")


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write a dataset with an integer `date` index column."""
    path = Path(path)
    lines = ["date," + ",".join(ds.channel_names)]
    for i in range(ds.length):
        cells = ",".join(repr(float(v)) for v in ds.values[i])
        lines.append(f"{i},{cells}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def window_parity_labels(parity: np.ndarray, starts: np.ndarray, lookback: int) -> np.ndarray:
    """Majority segment parity over each window's input span (0 or 1)."""
    labels = np.empty(len(starts), dtype=np.int64)
    for i, t in enumerate(starts):
        window = parity[t:t + lookback]
        labels[i] = int(round(window.mean()))
    return labels
