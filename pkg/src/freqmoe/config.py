"""Run configuration: JSON key/value files with strict validation.

Unknown keys are rejected (they are almost always typos in sweep scripts)
and hyperparameter values are held to the published search grid unless the
run explicitly opts out with ``allow_offgrid``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

from .errors import ConfigError

HORIZON_GRID = (12, 96, 192, 336, 720)
BLOCK_GRID = (1, 2, 3)
DROPOUT_GRID = (0.2, 0.3, 0.4)
BATCH_GRID = (8, 32, 64, 128)
LR_GRID = (0.001, 0.0005, 0.0001)
EXPERT_GRID = tuple(range(2, 11))  # 0 additionally allowed: bypasses the MoE block
MODELS = ("freqmoe", "dlinear", "dlinear+moe")
MASK_MODES = ("hard", "soft")
GATE_MODES = ("gated", "fixed")


@dataclass
class RunConfig:
    dataset: str = "synthetic"
    lookback: int = 96
    horizon: int = 96
    n_experts: int = 3
    n_blocks: int = 3
    dropout: float = 0.3
    batch_size: int = 32
    lr0: float = 0.001
    seed: int = 0
    epochs: int = 40
    patience: int = 6
    split: list[float] | None = None  # None = by dataset name (6:2:2 or 7:2:1)
    mask_mode: str = "soft"
    tau: float = 0.02
    gate_mode: str = "gated"
    eps: float = 1e-5
    model: str = "freqmoe"
    standardize: bool = True
    allow_offgrid: bool = False
    sweep: dict = field(default_factory=dict)  # e.g. {"experts": [0,3,5,8], "blocks": [1,2,3]}

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.lookback < 2:
            raise ConfigError(f"lookback must be >= 2, got {self.lookback}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        if self.gate_mode not in GATE_MODES:
            raise ConfigError(f"gate_mode must be one of {GATE_MODES}, got {self.gate_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.epochs < 1 or self.patience < 1:
            raise ConfigError("epochs and patience must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.n_experts < 0:
            raise ConfigError(f"n_experts must be >= 0, got {self.n_experts}")
        if self.n_blocks < 1:
            raise ConfigError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.split is not None:
            if len(self.split) != 3 or any(r <= 0 for r in self.split):
                raise ConfigError(f"split must be three positive ratios, got {self.split}")
            if abs(sum(self.split) - 1.0) > 1e-9:
                raise ConfigError(f"split ratios must sum to 1, got {sum(self.split)}")
        if self.model in ("freqmoe", "dlinear+moe") and self.n_experts == 0 \
                and self.model == "dlinear+moe":
            raise ConfigError("dlinear+moe requires n_experts >= 1")
        if not self.allow_offgrid:
            self._check_grid()

    def _check_grid(self) -> None:
        checks = [
            ("horizon", self.horizon, HORIZON_GRID),
            ("n_blocks", self.n_blocks, BLOCK_GRID),
            ("dropout", self.dropout, DROPOUT_GRID),
            ("batch_size", self.batch_size, BATCH_GRID),
            ("lr0", self.lr0, LR_GRID),
        ]
        for name, value, grid in checks:
            if value not in grid:
                raise ConfigError(
                    f"{name}={value} is outside the default grid {grid}; "
                    f"pass allow_offgrid to override"
                )
        if self.n_experts != 0 and self.n_experts not in EXPERT_GRID:
            raise ConfigError(
                f"n_experts={self.n_experts} is outside the default grid "
                f"(0 or {EXPERT_GRID}); pass allow_offgrid to override"
            )
        if self.lookback != 96:
            raise ConfigError(
                f"lookback={self.lookback} is off-grid (default 96); "
                f"pass allow_offgrid to override"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def config_from_dict(raw: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    cfg = RunConfig(**raw)
    # Normalize JSON types.
    if cfg.split is not None:
        cfg.split = [float(r) for r in cfg.split]
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(raw)
