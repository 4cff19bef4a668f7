"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail line
per criterion. The two ETTh1 criteria need the dataset CSV (see conftest);
they skip with an explicit message when it is absent.
"""

import numpy as np
import pytest

from conftest import etth1_path, requires_etth1

from freqmoe import data as datamod
from freqmoe import evaluation, moe, spectral
from freqmoe.model import build_net
from freqmoe.training import TrainConfig, fit, grad_check, substream


def _pipeline(dataset, ratios, lookback=96, horizon=96):
    train_r, val_r, test_r = datamod.split(dataset, ratios,
                                           min_length=lookback + horizon)
    scaled, _, _ = datamod.standardize(dataset, train_r)
    return {name: datamod.make_windows(scaled, rng, lookback, horizon, name)
            for name, rng in (("train", train_r), ("val", val_r), ("test", test_r))}


def _train(net, sets, seed, lr0=0.001, batch_size=32, epochs=40, patience=6):
    cfg = TrainConfig(epochs=epochs, patience=patience, lr0=lr0,
                      batch_size=batch_size, seed=seed)
    return fit(net, sets["train"].inputs, sets["train"].targets,
               sets["val"].inputs, sets["val"].targets, cfg)


def test_criterion_1_parameter_count_reproduction():
    """report for (s=96, p=96, N=3) gives 14,508 / 43,220 / 71,932 for n=1/3/5."""
    expected = {1: 14_508, 3: 43_220, 5: 71_932}
    published = {1: 14.5, 3: 43.2, 5: 71.9}
    for n_blocks, count in expected.items():
        report = evaluation.count_params(96, 96, 3, n_blocks)
        assert report.param_count == count
        assert abs(report.param_count / 1000 - published[n_blocks]) <= 0.1


def test_criterion_2_gradient_correctness():
    """Every parameter gradient matches central FD within 1e-4 rel (1e-7 floor)."""
    net = build_net("freqmoe", channels=2, lookback=16, horizon=8, n_experts=2,
                    n_blocks=2, dropout=0.3, mask_mode="soft",
                    rng=substream(7, "init"))
    # Move off the symmetric init so the boundary parameters carry signal.
    flat = net.param_set.to_flat()
    flat += substream(7, "jitter").normal(0.0, 0.1, size=flat.size)
    net.param_set.assign_flat(flat)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 2, 16))
    y = rng.normal(size=(2, 2, 8))
    report = grad_check(net, x, y, seed=11, step=1e-5, abs_floor=1e-7)
    assert report.max_rel_error < 1e-4, (report.worst_param, report.max_rel_error)


def test_criterion_3_spectral_invariants():
    """Round trip < 1e-10, Parseval < 1e-8 rel for L in 2..512; masks tile."""
    rng = np.random.default_rng(0)
    for length in range(2, 513):
        x = rng.normal(size=length)
        bins = spectral.rfft(x)
        assert np.max(np.abs(spectral.irfft(bins, length) - x)) < 1e-10
        w = spectral.hermitian_weights(length)
        energy = np.sum(w * np.abs(bins) ** 2) / length
        assert abs(energy - np.sum(x ** 2)) / np.sum(x ** 2) < 1e-8
    draws = np.random.default_rng(1)
    for _ in range(1000):
        n_experts = int(draws.integers(1, 11))
        theta = draws.normal(0.0, 3.0, size=n_experts - 1)
        partition = moe.compute_partition(theta, 49)
        masks = moe.build_masks(partition, 49)
        np.testing.assert_array_equal(masks.sum(axis=0), np.ones(49))


def test_criterion_4_synthetic_gate_attribution():
    """The expert owning 0.05 Hz leads on low-dominant windows by >= 0.1.

    Hyperparameters sit inside the published grid; lr0 = 1e-4 keeps the
    gate in its band-selection regime (the README documents the
    amplitude-equalizing regime the larger grid rates converge to).
    """
    seed = 2021
    ds = datamod.gen_synthetic(datamod.SyntheticSpec(seed=seed))
    parity = ds.values[:, ds.channel_names.index(datamod.PARITY_CHANNEL)]
    series = datamod.drop_channels(ds, [datamod.PARITY_CHANNEL])
    sets = _pipeline(series, (0.7, 0.2, 0.1))
    net = build_net("freqmoe", 1, 96, 96, n_experts=2, n_blocks=1, dropout=0.3,
                    rng=substream(seed, "init"))
    _train(net, sets, seed, lr0=0.0001)

    trace = evaluation.gate_trace(net, sets["test"])
    labels = datamod.window_parity_labels(parity, sets["test"].starts, lookback=96)
    assert (labels == 0).any() and (labels == 1).any()
    partition = moe.compute_partition(net.moe_block.theta, net.moe_block.freq_bins)
    low_bin = round(0.05 * 96)
    high_bin = round(0.4 * 96)
    low_expert = int(np.searchsorted(partition.index_cuts[1:-1], low_bin, side="right"))
    high_expert = int(np.searchsorted(partition.index_cuts[1:-1], high_bin, side="right"))
    assert low_expert != high_expert

    low_margin = (trace.weights[labels == 0, low_expert].mean()
                  - trace.weights[labels == 1, low_expert].mean())
    high_margin = (trace.weights[labels == 1, high_expert].mean()
                   - trace.weights[labels == 0, high_expert].mean())
    assert low_margin >= 0.1, f"low-band expert margin {low_margin:.4f}"
    assert high_margin >= 0.1, f"high-band expert margin {high_margin:.4f}"


@requires_etth1
def test_criterion_5_etth1_benchmark():
    """ETTh1 96->96 with default hyperparameters: test MSE <= 0.40, MAE <= 0.42."""
    seed = 2021
    dataset = datamod.load_csv(etth1_path())
    sets = _pipeline(dataset, (0.6, 0.2, 0.2))
    net = build_net("freqmoe", dataset.n_channels, 96, 96, n_experts=3, n_blocks=3,
                    dropout=0.3, rng=substream(seed, "init"))
    _train(net, sets, seed, lr0=0.001, batch_size=32)
    report = evaluation.evaluate(net, sets["test"])
    assert report.mse <= 0.40, f"test MSE {report.mse:.4f}"
    assert report.mae <= 0.42, f"test MAE {report.mae:.4f}"


@requires_etth1
def test_criterion_6_ablation_directions():
    """(a) gated N=3 <= no-MoE + 0.005; (b) gated strictly below fixed gate."""
    seed = 2021
    dataset = datamod.load_csv(etth1_path())
    sets = _pipeline(dataset, (0.6, 0.2, 0.2))

    def run(n_experts, gate_mode):
        net = build_net("freqmoe", dataset.n_channels, 96, 96, n_experts=n_experts,
                        n_blocks=3, dropout=0.3, gate_mode=gate_mode,
                        rng=substream(seed, "init"))
        _train(net, sets, seed, lr0=0.001, batch_size=32)
        return evaluation.evaluate(net, sets["test"]).mse

    gated = run(3, "gated")
    no_moe = run(0, "gated")
    fixed = run(3, "fixed")
    assert gated <= no_moe + 0.005, f"gated {gated:.4f} vs no-MoE {no_moe:.4f}"
    assert gated < fixed, f"gated {gated:.4f} vs fixed {fixed:.4f}"


def test_criterion_7_residual_stack_properties():
    """Zeroed blocks 2..n leave the n=1 forecast; horizon is always exact."""
    rng = substream(3, "init")
    three = build_net("freqmoe", 2, 96, 96, n_experts=3, n_blocks=3, dropout=0.0,
                      rng=rng)
    one = build_net("freqmoe", 2, 96, 96, n_experts=3, n_blocks=1, dropout=0.0,
                    rng=substream(3, "init"))
    # Identical init streams give block 1 the same weights; zero the rest.
    for i in (1, 2):
        block = three.stack.blocks[i]
        block.up1.weights[:] = 0
        block.up1.bias[:] = 0
        block.up2.weights[:] = 0
        block.up2.bias[:] = 0
    x = np.random.default_rng(5).normal(size=(3, 2, 96))
    np.testing.assert_allclose(three.predict(x), one.predict(x), atol=1e-12)

    for horizon in (12, 96, 192, 336, 720):
        for n_blocks in (1, 2, 3):
            for n_experts in (2, 5, 10):
                net = build_net("freqmoe", 1, 96, horizon, n_experts=n_experts,
                                n_blocks=n_blocks, dropout=0.3,
                                rng=substream(horizon, "init"))
                out = net.predict(np.zeros((1, 1, 96)))
                assert out.shape == (1, 1, horizon)


def test_criterion_8_determinism(tmp_path):
    """Identical config + seed produce byte-identical checkpoints and history."""
    import json
    from freqmoe import cli

    cfg = {"dataset": "synthetic", "horizon": 12, "lookback": 32, "n_experts": 2,
           "n_blocks": 1, "dropout": 0.2, "batch_size": 128, "lr0": 0.001,
           "seed": 11, "epochs": 2, "patience": 6, "allow_offgrid": True}
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.ckpt"
        assert cli.main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
        outputs.append((out.read_bytes(), out.with_suffix(".history.csv").read_bytes()))
    assert outputs[0][0] == outputs[1][0], "checkpoints differ"
    assert outputs[0][1] == outputs[1][1], "history files differ"
