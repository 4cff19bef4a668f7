"""Command-line interface.

Commands: train, eval, synth, sweep, report, gatetrace. Results go to
stdout, diagnostics to stderr. Exit codes: 0 success, 1 config error,
2 data error, 3 I/O error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import checkpoint as ckpt
from . import data as datamod
from . import evaluation
from .config import RunConfig, config_from_dict, load_config
from .errors import CheckpointError, ConfigError, DataError, FreqMoEError, InvalidInputError
from .model import build_net
from .training import TrainConfig, fit, substream, write_history_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _load_dataset(cfg: RunConfig) -> datamod.Dataset:
    if cfg.dataset == "synthetic":
        return datamod.gen_synthetic(datamod.SyntheticSpec(seed=cfg.seed))
    return datamod.load_csv(cfg.dataset)


def _prepare_windows(cfg: RunConfig):
    """Dataset -> (train, val, test) window sets in model channel space."""
    ds = _load_dataset(cfg)
    parity = None
    if datamod.PARITY_CHANNEL in ds.channel_names:
        parity = ds.values[:, ds.channel_names.index(datamod.PARITY_CHANNEL)]
        ds = datamod.drop_channels(ds, [datamod.PARITY_CHANNEL])
    ratios = tuple(cfg.split) if cfg.split else datamod.default_ratios(ds.name)
    min_len = cfg.lookback + cfg.horizon
    train_r, val_r, test_r = datamod.split(ds, ratios, min_length=min_len)
    if cfg.standardize:
        ds, _, _ = datamod.standardize(ds, train_r)
    sets = {
        "train": datamod.make_windows(ds, train_r, cfg.lookback, cfg.horizon, "train"),
        "val": datamod.make_windows(ds, val_r, cfg.lookback, cfg.horizon, "val"),
        "test": datamod.make_windows(ds, test_r, cfg.lookback, cfg.horizon, "test"),
    }
    return ds, sets, parity, ratios


def _build_from_config(cfg: RunConfig, channels: int):
    return build_net(cfg.model, channels, cfg.lookback, cfg.horizon, cfg.n_experts,
                     cfg.n_blocks, cfg.dropout, cfg.mask_mode, cfg.tau, cfg.gate_mode,
                     cfg.eps, rng=substream(cfg.seed, "init"))


def _default_ckpt_path(cfg: RunConfig) -> Path:
    stem = Path(cfg.dataset).stem if cfg.dataset != "synthetic" else "synthetic"
    return Path(f"{stem}_{cfg.model.replace('+', '-')}_h{cfg.horizon}_seed{cfg.seed}.ckpt")


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.allow_offgrid:
        cfg.allow_offgrid = True
    cfg.validate()
    _, sets, _, ratios = _prepare_windows(cfg)
    channels = sets["train"].inputs.shape[1]
    net = _build_from_config(cfg, channels)
    train_cfg = TrainConfig(epochs=cfg.epochs, patience=cfg.patience, lr0=cfg.lr0,
                            batch_size=cfg.batch_size, seed=cfg.seed)
    history = fit(net, sets["train"].inputs, sets["train"].targets,
                  sets["val"].inputs, sets["val"].targets, train_cfg)
    out_path = Path(args.out) if args.out else _default_ckpt_path(cfg)
    echo = {"run": cfg.to_dict(), "channels": channels, "ratios": list(ratios)}
    ckpt.save_checkpoint(out_path, echo, net.param_set)
    write_history_csv(history, out_path.with_suffix(".history.csv"))
    best_val = min(row["val_mse"] for row in history)
    print(f"checkpoint: {out_path}")
    print(f"history: {out_path.with_suffix('.history.csv')}")
    print(f"final validation MSE: {best_val!r}")
    return EXIT_OK


def _restore(checkpoint_path: str):
    echo, arrays = ckpt.load_checkpoint(checkpoint_path)
    cfg = config_from_dict(echo["run"])
    net = _build_from_config(cfg, echo["channels"])
    ckpt.restore_into(net.param_set, arrays)
    return cfg, net, echo


def cmd_eval(args) -> int:
    cfg, net, echo = _restore(args.checkpoint)
    if args.horizon is not None and args.horizon != cfg.horizon:
        raise CheckpointError(
            f"checkpoint was trained for horizon {cfg.horizon}, requested {args.horizon}"
        )
    if args.dataset:
        cfg.dataset = args.dataset
    _, sets, _, _ = _prepare_windows(cfg)
    if sets["test"].inputs.shape[1] != echo["channels"]:
        raise CheckpointError(
            f"dataset has {sets['test'].inputs.shape[1]} channels, "
            f"checkpoint expects {echo['channels']}"
        )
    report = evaluation.evaluate(net, sets["test"], dataset=Path(cfg.dataset).stem,
                                 horizon=cfg.horizon, seed=cfg.seed,
                                 config_hash=cfg.hash())
    print(report.table())
    out = Path(args.out) if args.out else Path(args.checkpoint).with_suffix(".metrics.csv")
    evaluation.write_metric_csv(report, out)
    print(f"metrics csv: {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = datamod.SyntheticSpec(seed=args.seed if args.seed is not None else 0)
    ds = datamod.gen_synthetic(spec)
    out = Path(args.out) if args.out else Path("synthetic.csv")
    datamod.write_dataset_csv(ds, out)
    print(f"wrote {ds.length} rows to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.allow_offgrid:
        cfg.allow_offgrid = True
    axis = args.axis
    defaults = {"experts": [0, 3, 5, 8], "blocks": [1, 2, 3]}
    values = cfg.sweep.get(axis, defaults[axis])
    out = Path(args.out) if args.out else Path(f"sweep_{axis}.csv")
    done: set[str] = set()
    rows: list[list[str]] = []
    if out.exists():
        with out.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            next(reader, None)
            for row in reader:
                if row:
                    done.add(row[0])
                    rows.append(row)
    for value in values:
        if str(value) in done:
            print(f"{axis}={value}: already present, skipping", file=sys.stderr)
            continue
        run_cfg = config_from_dict({**cfg.to_dict(),
                                    ("n_experts" if axis == "experts" else "n_blocks"): value})
        _, sets, _, _ = _prepare_windows(run_cfg)
        channels = sets["train"].inputs.shape[1]
        net = _build_from_config(run_cfg, channels)
        train_cfg = TrainConfig(epochs=run_cfg.epochs, patience=run_cfg.patience,
                                lr0=run_cfg.lr0, batch_size=run_cfg.batch_size,
                                seed=run_cfg.seed)
        fit(net, sets["train"].inputs, sets["train"].targets,
            sets["val"].inputs, sets["val"].targets, train_cfg)
        report = evaluation.evaluate(net, sets["test"])
        rows.append([str(value), repr(report.mse), repr(report.mae)])
        print(f"{axis}={value}: mse={report.mse:.6f} mae={report.mae:.6f}")
        _write_sweep_csv(out, rows)
    _write_sweep_csv(out, rows)
    print(f"sweep csv: {out}")
    return EXIT_OK


def _write_sweep_csv(path: Path, rows: list[list[str]]) -> None:
    lines = ["axis_value,mse,mae"] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _peek_channels(cfg: RunConfig) -> int:
    if cfg.dataset == "synthetic":
        return 1
    path = Path(cfg.dataset)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        header = next(csv.reader(handle))
    names = [n.strip() for n in header[1:]]
    return len([n for n in names if n != datamod.PARITY_CHANNEL])


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    if args.allow_offgrid:
        cfg.allow_offgrid = True
    cfg.validate()
    channels = _peek_channels(cfg)
    for n_blocks in sorted({cfg.n_blocks, 1, 3, 5}) if args.table else [cfg.n_blocks]:
        params = evaluation.count_params(cfg.lookback, cfg.horizon, cfg.n_experts,
                                         n_blocks, cfg.model, cfg.gate_mode)
        macs = evaluation.count_macs(cfg.lookback, cfg.horizon, cfg.n_experts,
                                     n_blocks, channels, cfg.model)
        print(f"model={cfg.model} lookback={cfg.lookback} horizon={cfg.horizon} "
              f"experts={cfg.n_experts} blocks={n_blocks} channels={channels}")
        print(f"  parameters (complex-counted): {params.param_count:,}")
        print(f"  parameters (real-valued):     {params.param_count_real:,}")
        print(f"  MACs per window: {macs.mac_count:,} "
              f"(linear {macs.linear_macs:,}, fft {macs.fft_macs:,})")
        print(f"  MAC convention: {macs.convention}")
    return EXIT_OK


def cmd_gatetrace(args) -> int:
    cfg, net, echo = _restore(args.checkpoint)
    if args.dataset:
        cfg.dataset = args.dataset
    _, sets, _, _ = _prepare_windows(cfg)
    out = Path(args.out) if args.out else Path(args.checkpoint).with_suffix(".gatetrace.csv")
    trace = evaluation.export_gate_trace(net, sets["test"], out)
    print(f"gate trace for {trace.weights.shape[0]} windows x "
          f"{trace.weights.shape[1]} experts: {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqmoe",
                                     description="Frequency-band mixture-of-experts forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=False, checkpoint=False, dataset=False):
        if config:
            p.add_argument("--config", required=True, help="path to JSON run config")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="path to checkpoint file")
        if dataset:
            p.add_argument("--dataset", default=None, help="dataset CSV (overrides config echo)")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument("--allow-offgrid", action="store_true", dest="allow_offgrid",
                       help="permit hyperparameters outside the default grid")

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    add_common(p_train, config=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    add_common(p_eval, checkpoint=True, dataset=True)
    p_eval.add_argument("--horizon", type=int, default=None,
                        help="expected horizon (must match the checkpoint)")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate the synthetic benchmark CSV")
    add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_sweep = sub.add_parser("sweep", help="train one model per axis value")
    add_common(p_sweep, config=True)
    p_sweep.add_argument("--axis", choices=("experts", "blocks"), required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="print parameter and MAC counts")
    add_common(p_report, config=True)
    p_report.add_argument("--table", action="store_true",
                          help="also report block counts 1/3/5")
    p_report.set_defaults(func=cmd_report)

    p_trace = sub.add_parser("gatetrace", help="export per-window gate scores")
    add_common(p_trace, checkpoint=True, dataset=True)
    p_trace.set_defaults(func=cmd_gatetrace)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidInputError, FreqMoEError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
