import numpy as np
import pytest

from freqmoe import training
from freqmoe.errors import InvalidInputError
from freqmoe.model import build_net
from freqmoe.training import (TrainConfig, TrainState, adam_step, compute_gradients,
                              fit, grad_check, mae_loss, mse_loss, substream)


class TestLosses:
    def test_mse_zero_on_equal(self):
        x = np.random.default_rng(0).normal(size=(2, 3))
        assert mse_loss(x, x) == 0.0

    def test_mse_hand_value(self):
        assert mse_loss(np.zeros(2), np.array([1.0, 3.0])) == 5.0

    def test_mse_quadruples_on_doubled_error(self):
        pred = np.array([1.0, 2.0])
        target = np.array([0.0, 0.0])
        assert mse_loss(2 * pred, target) == pytest.approx(4 * mse_loss(pred, target))

    def test_mae_zero_on_equal(self):
        x = np.ones((4,))
        assert mae_loss(x, x) == 0.0

    def test_mae_hand_value(self):
        assert mae_loss(np.zeros(2), np.array([1.0, 3.0])) == 2.0

    def test_mae_sign_symmetric(self):
        target = np.zeros(3)
        errs = np.array([1.0, -2.0, 3.0])
        assert mae_loss(errs, target) == mae_loss(-errs, target)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            mse_loss(np.zeros(2), np.zeros(3))
        with pytest.raises(InvalidInputError):
            mae_loss(np.zeros(2), np.zeros(3))


class TestAdam:
    def _state(self, n=4, lr=0.01):
        cfg = TrainConfig(lr0=lr, batch_size=8)
        state = TrainState(params=np.zeros(n), adam_m=np.zeros(n), adam_v=np.zeros(n),
                           lr=lr, patience_left=cfg.patience)
        return state

    def test_zero_gradient_leaves_params(self):
        state = self._state()
        before = state.params.copy()
        adam_step(state, np.zeros(4))
        np.testing.assert_array_equal(state.params, before)

    def test_first_step_magnitude_is_lr(self):
        state = self._state(lr=0.01)
        g = np.array([5.0, -0.3, 2e-4, 40.0])
        adam_step(state, g)
        # First-step Adam moves each coordinate by ~lr*sign(g).
        np.testing.assert_allclose(np.abs(state.params), 0.01, rtol=1e-3)
        np.testing.assert_array_equal(np.sign(state.params), -np.sign(g))

    def test_two_runs_bitwise_identical(self):
        results = []
        for _ in range(2):
            state = self._state()
            rng = np.random.default_rng(0)
            for _ in range(5):
                adam_step(state, rng.normal(size=4))
            results.append(state.params.copy())
        np.testing.assert_array_equal(results[0], results[1])


class TestComputeGradients:
    def test_zero_error_batch_gives_zero_grads(self, tiny_net, tiny_batch):
        x, _ = tiny_batch
        # Use the model's own (deterministic) output as the target.
        forecast, cache = tiny_net.forward(x, training=True,
                                           rng=substream(0, "gradcheck-dropout"))
        from freqmoe.normalization import denormalize
        y = denormalize(forecast, cache["stats"])
        _, grads = compute_gradients(tiny_net, x, y,
                                     rng=substream(0, "gradcheck-dropout"))
        flat = tiny_net.param_set.flatten_tree(grads)
        np.testing.assert_allclose(flat, 0.0, atol=1e-12)

    def test_gate_bias_gradient_sums_to_zero(self, tiny_net, tiny_batch):
        # Softmax Jacobian rows sum to zero, so the bias gradient does too.
        x, y = tiny_batch
        _, grads = compute_gradients(tiny_net, x, y, rng=substream(1, "d"))
        assert abs(grads["moe.gate.bias"].sum()) < 1e-12

    def test_single_parameter_fd(self, tiny_net, tiny_batch):
        x, y = tiny_batch
        ps = tiny_net.param_set
        _, grads = compute_gradients(tiny_net, x, y, rng=substream(2, "gradcheck-dropout"))
        flat = ps.flatten_tree(grads)
        base = ps.to_flat()
        idx = int(np.argmax(np.abs(flat)))
        h = 1e-6

        def loss_at():
            fc, cache = tiny_net.forward(x, training=True,
                                         rng=substream(2, "gradcheck-dropout"))
            tn = training.normalized_targets(y, cache["stats"])
            return float(np.mean((fc - tn) ** 2))

        probe = base.copy()
        probe[idx] = base[idx] + h
        ps.assign_flat(probe)
        up = loss_at()
        probe[idx] = base[idx] - h
        ps.assign_flat(probe)
        down = loss_at()
        ps.assign_flat(base)
        fd = (up - down) / (2 * h)
        assert abs(flat[idx] - fd) < 1e-6 * max(1.0, abs(fd))


def _sine_windows(n_windows=64, lookback=16, horizon=8, channels=1):
    t = np.arange(n_windows + lookback + horizon)
    series = np.sin(2 * np.pi * t / 8.0)
    inputs = np.stack([[series[i:i + lookback]] * channels for i in range(n_windows)])
    targets = np.stack([[series[i + lookback:i + lookback + horizon]] * channels
                        for i in range(n_windows)])
    return inputs, targets


class TestFit:
    def test_lr_schedule_halves_per_epoch(self):
        x, y = _sine_windows()
        net = build_net("freqmoe", 1, 16, 8, 1, 1, 0.2, rng=substream(0, "init"))
        cfg = TrainConfig(epochs=4, patience=6, lr0=0.001, batch_size=16, seed=0)
        history = fit(net, x[:48], y[:48], x[48:], y[48:], cfg)
        assert [row["lr"] for row in history] == [0.001, 0.0005, 0.00025, 0.000125]

    def test_zero_lr_is_bitwise_noop_and_patience_counts_past_best(self):
        x, y = _sine_windows()
        net = build_net("freqmoe", 1, 16, 8, 1, 1, 0.2, rng=substream(1, "init"))
        before = net.param_set.to_flat()
        cfg = TrainConfig(epochs=40, patience=6, lr0=0.0, batch_size=16, seed=0)
        history = fit(net, x[:48], y[:48], x[48:], y[48:], cfg)
        np.testing.assert_array_equal(net.param_set.to_flat(), before)
        # Constant validation: best at epoch 1, six non-improvements, stop.
        assert len(history) == 7

    def test_same_seed_same_history(self):
        x, y = _sine_windows()
        histories = []
        for _ in range(2):
            net = build_net("freqmoe", 1, 16, 8, 2, 1, 0.2, rng=substream(2, "init"))
            cfg = TrainConfig(epochs=3, patience=6, lr0=0.001, batch_size=16, seed=5)
            histories.append(fit(net, x[:48], y[:48], x[48:], y[48:], cfg))
        assert histories[0] == histories[1]

    def test_best_weights_restored(self):
        x, y = _sine_windows()
        net = build_net("freqmoe", 1, 16, 8, 1, 1, 0.2, rng=substream(3, "init"))
        cfg = TrainConfig(epochs=6, patience=6, lr0=0.001, batch_size=16, seed=1)
        history = fit(net, x[:48], y[:48], x[48:], y[48:], cfg)
        best = min(row["val_mse"] for row in history)
        restored = training.validation_mse(net, x[48:], y[48:])
        assert restored == pytest.approx(best, rel=1e-12)

    def test_sinusoid_training_loss_drops_90_percent(self):
        x, y = _sine_windows(n_windows=1088)
        net = build_net("freqmoe", 1, 16, 8, 1, 1, 0.2, rng=substream(4, "init"))
        # Training loss of the untrained model, same quantity the loop tracks.
        forecast, cache = net.forward(x[:1024], training=True,
                                      rng=substream(2, "dropout"))
        initial = mse_loss(forecast, training.normalized_targets(y[:1024], cache["stats"]))
        cfg = TrainConfig(epochs=40, patience=40, lr0=0.001, batch_size=8, seed=2)
        history = fit(net, x[:1024], y[:1024], x[1024:], y[1024:], cfg)
        best = min(row["train_mse"] for row in history)
        assert best < 0.1 * initial

    def test_empty_dataset_rejected(self):
        net = build_net("freqmoe", 1, 16, 8, 1, 1, 0.2, rng=substream(5, "init"))
        empty = np.zeros((0, 1, 16))
        with pytest.raises(InvalidInputError):
            fit(net, empty, np.zeros((0, 1, 8)), empty, np.zeros((0, 1, 8)),
                TrainConfig())


class TestGradCheck:
    def test_small_model_under_tolerance(self, tiny_net, tiny_batch):
        x, y = tiny_batch
        report = grad_check(tiny_net, x, y, seed=11)
        assert report.max_rel_error < 1e-4

    def test_hard_mask_theta_reported_zero(self, tiny_batch):
        x, y = tiny_batch
        net = build_net("freqmoe", 2, 16, 8, 2, 1, 0.0, mask_mode="hard",
                        rng=substream(6, "init"))
        _, grads = compute_gradients(net, x, y)
        assert np.all(grads["moe.theta"] == 0.0)
        report = grad_check(net, x, y, seed=3)
        assert report.per_param["moe.theta"] == 0.0

    def test_report_deterministic(self, tiny_batch):
        x, y = tiny_batch
        reports = []
        for _ in range(2):
            net = build_net("freqmoe", 2, 16, 8, 2, 1, 0.3, rng=substream(7, "init"))
            reports.append(grad_check(net, x, y, seed=9))
        assert reports[0].max_rel_error == reports[1].max_rel_error
        assert reports[0].per_param == reports[1].per_param
