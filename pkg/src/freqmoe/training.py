"""Training loop, losses, Adam, and finite-difference gradient verification.

Every learnable array in the network gets its gradient from the reverse-mode
passes in :mod:`freqmoe.model`; this module flattens them into one real
vector, runs Adam on it, halves the learning rate after every epoch, and
early-stops on validation MSE with the best weights restored at exit.

The training criterion is MSE over the forecast horizon in normalized
(instance-norm) space; validation and test metrics are computed after
denormalization, matching how forecasting benchmarks report results.

All randomness (shuffling, dropout) is drawn from named substreams of the
single run seed, so identical configurations replay bit-for-bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .params import ParamSet

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator derived from the run seed and a stream name."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mae_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


@dataclass
class TrainConfig:
    epochs: int = 40
    patience: int = 6
    lr0: float = 0.001
    batch_size: int = 32
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self):
        if self.epochs < 1 or self.patience < 1:
            raise InvalidInputError("epochs and patience must be >= 1")
        if self.lr0 < 0 or self.batch_size < 1:
            raise InvalidInputError("lr0 must be >= 0 and batch_size >= 1")
        if self.loss != "mse":
            raise InvalidInputError(f"unsupported training loss {self.loss!r}")


@dataclass
class TrainState:
    """Flat parameter vector plus Adam moments and schedule bookkeeping."""

    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step: int = 0
    lr: float = 0.001
    epoch: int = 0
    best_val: float = np.inf
    patience_left: int = 0

    @classmethod
    def create(cls, param_set: ParamSet, cfg: TrainConfig) -> "TrainState":
        flat = param_set.to_flat()
        return cls(params=flat, adam_m=np.zeros_like(flat), adam_v=np.zeros_like(flat),
                   lr=cfg.lr0, patience_left=cfg.patience)


def adam_step(state: TrainState, grads: np.ndarray) -> TrainState:
    """In-place Adam update with bias correction; returns the state."""
    if grads.shape != state.params.shape:
        raise InvalidInputError("gradient vector shape does not match parameters")
    state.step += 1
    state.adam_m = ADAM_BETA1 * state.adam_m + (1 - ADAM_BETA1) * grads
    state.adam_v = ADAM_BETA2 * state.adam_v + (1 - ADAM_BETA2) * grads ** 2
    m_hat = state.adam_m / (1 - ADAM_BETA1 ** state.step)
    v_hat = state.adam_v / (1 - ADAM_BETA2 ** state.step)
    state.params -= state.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return state


def normalized_targets(targets: np.ndarray, stats) -> np.ndarray:
    return (targets - stats.mean[:, :, None]) / stats.std[:, :, None]


def compute_gradients(net, inputs: np.ndarray, targets: np.ndarray,
                      rng: np.random.Generator | None = None
                      ) -> tuple[float, dict[str, np.ndarray]]:
    """Forward + loss + reverse-mode pass for one minibatch.

    Returns the normalized-space horizon MSE and gradients for every
    learnable array.
    """
    forecast, cache = net.forward(inputs, training=True, rng=rng)
    target_norm = normalized_targets(np.asarray(targets, dtype=np.float64), cache["stats"])
    if forecast.shape != target_norm.shape:
        raise InvalidInputError(
            f"forecast shape {forecast.shape} != target shape {target_norm.shape}"
        )
    diff = forecast - target_norm
    loss = float(np.mean(diff ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, net.backward(cache, grad)


def validation_mse(net, inputs: np.ndarray, targets: np.ndarray,
                   batch_size: int = 256) -> float:
    """Denormalized-space MSE over a window set, evaluation mode."""
    total = 0.0
    count = 0
    for lo in range(0, len(inputs), batch_size):
        x = inputs[lo:lo + batch_size]
        y = targets[lo:lo + batch_size]
        pred = net.predict(x)
        total += float(np.sum((pred - y) ** 2))
        count += y.size
    if count == 0:
        raise InvalidInputError("empty validation set")
    return total / count


def fit(net, train_inputs: np.ndarray, train_targets: np.ndarray,
        val_inputs: np.ndarray, val_targets: np.ndarray,
        cfg: TrainConfig) -> list[dict]:
    """Train with per-epoch LR halving and patience-based early stopping.

    Returns the epoch history (epoch, train_mse, val_mse, lr); the network
    is left holding the weights of its best validation epoch.
    """
    if len(train_inputs) == 0 or len(val_inputs) == 0:
        raise InvalidInputError("training and validation sets must be non-empty")
    shuffle_rng = substream(cfg.seed, "shuffle")
    dropout_rng = substream(cfg.seed, "dropout")
    param_set = net.param_set
    state = TrainState.create(param_set, cfg)
    best_params = state.params.copy()
    history: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        state.epoch = epoch
        state.lr = cfg.lr0 * 0.5 ** (epoch - 1)
        order = shuffle_rng.permutation(len(train_inputs))
        sq_sum = 0.0
        n_seen = 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = compute_gradients(net, train_inputs[idx], train_targets[idx],
                                            rng=dropout_rng)
            flat_grads = param_set.flatten_tree(grads)
            adam_step(state, flat_grads)
            param_set.assign_flat(state.params)
            batch_elems = train_targets[idx].size
            sq_sum += loss * batch_elems
            n_seen += batch_elems
        train_mse = sq_sum / n_seen
        val_mse = validation_mse(net, val_inputs, val_targets)
        history.append({"epoch": epoch, "train_mse": train_mse,
                        "val_mse": val_mse, "lr": state.lr})
        if val_mse < state.best_val:
            state.best_val = val_mse
            best_params = state.params.copy()
            state.patience_left = cfg.patience
        else:
            state.patience_left -= 1
            if state.patience_left == 0:
                break

    param_set.assign_flat(best_params)
    return history


def write_history_csv(history: list[dict], path) -> None:
    lines = ["epoch,train_mse,val_mse,lr"]
    for row in history:
        lines.append(f"{row['epoch']},{row['train_mse']!r},{row['val_mse']!r},{row['lr']!r}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    per_param: dict[str, float] = field(default_factory=dict)


def grad_check(net, inputs: np.ndarray, targets: np.ndarray, seed: int = 0,
               step: float = 1e-5, abs_floor: float = 1e-7) -> GradCheckReport:
    """Compare every analytic parameter gradient to central finite differences.

    The dropout stream is re-seeded identically for every loss evaluation so
    the objective is deterministic in the parameters. Intended for small
    models only (cost is two forward passes per scalar parameter).
    """
    param_set = net.param_set

    def loss_at() -> float:
        forecast, cache = net.forward(inputs, training=True,
                                      rng=substream(seed, "gradcheck-dropout"))
        target_norm = normalized_targets(np.asarray(targets, dtype=np.float64),
                                         cache["stats"])
        return float(np.mean((forecast - target_norm) ** 2))

    _, grads = compute_gradients(net, inputs, targets,
                                 rng=substream(seed, "gradcheck-dropout"))
    analytic = param_set.flatten_tree(grads)

    base = param_set.to_flat()
    numeric = np.zeros_like(base)
    probe = base.copy()
    for i in range(base.size):
        probe[i] = base[i] + step
        param_set.assign_flat(probe)
        up = loss_at()
        probe[i] = base[i] - step
        param_set.assign_flat(probe)
        down = loss_at()
        probe[i] = base[i]
        numeric[i] = (up - down) / (2 * step)
    param_set.assign_flat(base)

    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    # Differences below the absolute floor count as exact agreement.
    rel = np.where(diff <= abs_floor, 0.0, diff / np.maximum(denom, abs_floor))
    worst = int(np.argmax(rel))
    per_param: dict[str, float] = {}
    for name in param_set.names:
        lo, hi = param_set.slice_of(name)
        per_param[name] = float(rel[lo:hi].max()) if hi > lo else 0.0
    return GradCheckReport(max_rel_error=float(rel[worst]),
                           worst_param=param_set.name_at(worst),
                           per_param=per_param)
