"""Trainer: schedules, the SGD driver contract, and layerwise pretraining."""

import numpy as np
import pytest

from deskasr.errors import ConfigError
from deskasr.nn import InputView, Network, NetworkSpec, init_params
from deskasr.nn import archs
from deskasr.nn import network as net
from deskasr.trainer import (
    DropoutSchedule,
    FrameDataset,
    TrainConfig,
    anneal_rate,
    evaluate,
    layerwise_pretrain,
    lr_at,
    pretrain_stages,
    read_history,
    sgd_epoch,
    train,
    write_history,
)


def params_equal(a, b):
    for pa, pb in zip(a, b):
        if pa is None:
            if pb is not None:
                return False
            continue
        for k in pa:
            if not np.array_equal(pa[k], pb[k]):
                return False
    return True


def toy_dataset(n=60, dim=6, classes=3, seed=0, separation=3.0):
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((classes, dim)) * separation
    targets = rng.integers(0, classes, size=n)
    inputs = means[targets] + rng.standard_normal((n, dim))
    return FrameDataset(inputs, targets)


class TestDropoutSchedule:
    def test_initial_epoch_gives_p0(self):
        assert anneal_rate(DropoutSchedule(0.4, 8), 0) == 0.4

    def test_zero_at_and_after_end_epoch(self):
        s = DropoutSchedule(0.4, 8)
        assert anneal_rate(s, 8) == 0.0
        assert anneal_rate(s, 20) == 0.0

    def test_linear_midpoint(self):
        assert anneal_rate(DropoutSchedule(0.5, 10), 5) == pytest.approx(0.25)

    def test_missing_schedule_means_no_dropout(self):
        assert anneal_rate(None, 3) == 0.0

    def test_negative_epoch_rejected(self):
        with pytest.raises(ConfigError):
            anneal_rate(DropoutSchedule(0.5, 10), -1)

    def test_invalid_rate_rejected(self):
        for bad in (-0.1, 1.0):
            with pytest.raises(ConfigError):
                DropoutSchedule(bad, 10)

    @pytest.mark.parametrize("seed", range(5))
    def test_sequence_nonincreasing_and_hits_zero(self, seed):
        rng = np.random.default_rng(seed)
        s = DropoutSchedule(float(rng.uniform(0, 0.99)), int(rng.integers(1, 20)))
        rates = [anneal_rate(s, e) for e in range(25)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert rates[-1] == 0.0
        assert all(0.0 <= r <= s.p0 for r in rates)


class TestConfigValidation:
    def test_defaults_are_valid(self):
        cfg = TrainConfig()
        assert cfg.epochs == 12
        assert cfg.minibatch_frames == 250
        assert cfg.lr_decay == 0.8

    def test_bad_fields_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=-1)
        with pytest.raises(ConfigError):
            TrainConfig(minibatch_frames=0)
        with pytest.raises(ConfigError):
            TrainConfig(lr0=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(lr_decay=0.0)

    def test_lr_schedule_decays_per_epoch(self):
        cfg = TrainConfig(lr0=0.1, lr_decay=0.8)
        assert lr_at(cfg, 0) == pytest.approx(0.1)
        assert lr_at(cfg, 1) == pytest.approx(0.08)
        assert lr_at(cfg, 3) == pytest.approx(0.1 * 0.8**3)


class RecordingModel:
    """Protocol stub that records the driver's calls without learning."""

    def __init__(self):
        self.batch_sizes = []
        self.lrs = []
        self.rates = []

    def minibatch_loss_and_grads(self, mb, dropout_rate=0.0, rng=None):
        self.batch_sizes.append(mb.inputs.shape[0])
        self.rates.append(dropout_rate)
        return 1.0, []

    def sgd_step(self, grads, lr):
        self.lrs.append(lr)

    def eval_loss_accuracy(self, mb):
        return 1.0, 0.0


class TestSgdEpoch:
    def small_model(self, dim=6, classes=3, seed=0):
        spec = archs.dnn_spec(dim, InputView(), [8], bottleneck=5,
                              num_outputs=classes)
        return Network(spec, seed=seed)

    def test_zero_lr_leaves_params_at_init_and_loss_at_eval(self):
        data = toy_dataset()
        model = self.small_model()
        before = [None if p is None else {k: v.copy() for k, v in p.items()}
                  for p in model.params]
        eval_loss, _ = evaluate(model, data)
        cfg = TrainConfig(lr0=1e-30, minibatch_frames=7, seed=3)
        # lr0 must be > 0 by contract; drive the step to zero exactly
        model.sgd_step = lambda grads, lr: None
        _, loss = sgd_epoch(model, data, cfg, epoch=0)
        assert params_equal(model.params, before)
        assert loss == pytest.approx(eval_loss, abs=1e-12)

    def test_separable_toy_loss_strictly_decreases(self):
        # softmax-only model = multinomial logistic regression (convex)
        rng = np.random.default_rng(5)
        x = np.vstack([rng.normal(-2, 0.5, (40, 2)), rng.normal(2, 0.5, (40, 2))])
        y = np.repeat([0, 1], 40)
        data = FrameDataset(x, y)
        spec = NetworkSpec([net.softmax_output(2, 2)], InputView())
        model = Network(spec, seed=0)
        cfg = TrainConfig(epochs=5, minibatch_frames=16, lr0=0.5, seed=1)
        losses = []
        for epoch in range(5):
            _, loss = sgd_epoch(model, data, cfg, epoch)
            losses.append(loss)
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_same_seed_is_bit_identical(self):
        data = toy_dataset(seed=2)
        cfg = TrainConfig(minibatch_frames=13, lr0=0.2, seed=9)
        runs = []
        for _ in range(2):
            model = self.small_model(seed=4)
            sgd_epoch(model, data, cfg, epoch=0)
            sgd_epoch(model, data, cfg, epoch=1)
            runs.append(model.params)
        assert params_equal(*runs)

    def test_different_epoch_gives_different_permutation(self):
        data = toy_dataset(seed=2)
        cfg = TrainConfig(minibatch_frames=13, lr0=0.2, seed=9)
        a = self.small_model(seed=4)
        b = self.small_model(seed=4)
        sgd_epoch(a, data, cfg, epoch=0)
        sgd_epoch(b, data, cfg, epoch=1)
        assert not params_equal(a.params, b.params)

    def test_empty_dataset_rejected(self):
        data = FrameDataset(np.zeros((0, 4)), np.zeros(0, dtype=int))
        with pytest.raises(ConfigError):
            sgd_epoch(self.small_model(dim=4), data, TrainConfig(), 0)

    def test_last_partial_minibatch_processed(self):
        data = toy_dataset(n=10, dim=3)
        stub = RecordingModel()
        cfg = TrainConfig(minibatch_frames=4, lr0=0.1)
        sgd_epoch(stub, data, cfg, epoch=0)
        assert stub.batch_sizes == [4, 4, 2]

    def test_driver_passes_annealed_rate_and_decayed_lr(self):
        data = toy_dataset(n=8, dim=3)
        stub = RecordingModel()
        cfg = TrainConfig(
            minibatch_frames=8, lr0=0.1, lr_decay=0.5, seed=0,
            dropout=DropoutSchedule(0.4, 4),
        )
        sgd_epoch(stub, data, cfg, epoch=2)
        assert stub.rates == [pytest.approx(0.2)]
        assert stub.lrs == [pytest.approx(0.025)]


class TestTrain:
    def test_zero_epochs_empty_history_params_untouched(self):
        data = toy_dataset()
        spec = archs.dnn_spec(6, InputView(), [8], bottleneck=5, num_outputs=3)
        model = Network(spec, seed=0)
        before = [None if p is None else {k: v.copy() for k, v in p.items()}
                  for p in model.params]
        history = train(model, data, TrainConfig(epochs=0))
        assert history == []
        assert params_equal(model.params, before)

    def test_history_logs_schedule_exactly(self):
        data = toy_dataset()
        spec = archs.maxout_dnn_spec(6, InputView(), [4], bottleneck=5,
                                     num_outputs=3)
        model = Network(spec, seed=0)
        sched = DropoutSchedule(0.5, 3)
        cfg = TrainConfig(epochs=4, lr0=0.1, lr_decay=0.8, seed=1,
                          minibatch_frames=16, dropout=sched)
        history = train(model, data, cfg)
        assert [h.epoch for h in history] == [0, 1, 2, 3]
        for h in history:
            assert h.dropout_rate == anneal_rate(sched, h.epoch)
            assert h.lr == pytest.approx(lr_at(cfg, h.epoch))
        assert history[-1].dropout_rate == 0.0

    def test_final_loss_below_initial_eval_loss(self):
        data = toy_dataset(n=120, seed=7)
        spec = archs.dnn_spec(6, InputView(), [10], bottleneck=6, num_outputs=3)
        model = Network(spec, seed=2)
        first, _ = evaluate(model, data)
        history = train(model, data, TrainConfig(epochs=6, lr0=0.3, seed=0,
                                                 minibatch_frames=20))
        assert history[-1].loss < first

    def test_full_run_bit_reproducible(self):
        data = toy_dataset(seed=3)
        spec = archs.maxout_dnn_spec(6, InputView(), [4], bottleneck=5,
                                     num_outputs=3)
        cfg = TrainConfig(epochs=3, lr0=0.2, seed=5, minibatch_frames=11,
                          dropout=DropoutSchedule(0.3, 2))
        runs = []
        for _ in range(2):
            model = Network(spec, seed=6)
            train(model, data, cfg)
            runs.append(model.params)
        assert params_equal(*runs)

    def test_history_csv_round_trip(self, tmp_path):
        data = toy_dataset()
        spec = archs.dnn_spec(6, InputView(), [8], bottleneck=5, num_outputs=3)
        model = Network(spec, seed=0)
        history = train(model, data, TrainConfig(epochs=2, minibatch_frames=16))
        path = tmp_path / "history.csv"
        write_history(path, history)
        back = read_history(path)
        assert [h.epoch for h in back] == [h.epoch for h in history]
        for a, b in zip(back, history):
            assert a.loss == pytest.approx(b.loss, abs=1e-7)
            assert a.frame_accuracy == pytest.approx(b.frame_accuracy, abs=1e-5)
        header = path.read_text().splitlines()[0]
        assert header == "epoch,dropout_rate,lr,loss,frame_accuracy"


class TestLayerwisePretrain:
    def test_stage_count_equals_hidden_layers(self):
        spec = archs.dnn_spec(6, InputView(), [8, 7, 6, 5], bottleneck=4,
                              num_outputs=3)
        # 4 hidden affines + bottleneck affine are the parameterized
        # non-output layers -> 5 growth stages
        assert len(pretrain_stages(spec)) == 5

    def test_stages_nest_and_end_before_next_param_layer(self):
        spec = archs.dnn_spec(6, InputView(), [8, 7], bottleneck=4,
                              num_outputs=3)
        stages = pretrain_stages(spec)
        # layers: affine, sigmoid, affine, sigmoid, affine(bottleneck), softmax
        assert stages == [[0, 1], [0, 1, 2, 3], [0, 1, 2, 3, 4]]

    def test_single_hidden_layer_equals_plain_training(self):
        data = toy_dataset(seed=1)
        spec = NetworkSpec(
            [net.affine(6, 8), net.sigmoid(8), net.softmax_output(8, 3)],
            InputView(),
        )
        cfg = TrainConfig(epochs=3, lr0=0.2, seed=4, minibatch_frames=16)
        pre = layerwise_pretrain(spec, data, cfg, per_stage_epochs=3)
        plain = Network(spec, init_params(spec, seed=cfg.seed))
        for epoch in range(3):
            sgd_epoch(plain, data, cfg, epoch)
        assert params_equal(pre, plain.params)

    def test_pretrained_init_beats_random_in_most_trials(self):
        wins = 0
        for trial in range(10):
            data = toy_dataset(n=90, dim=5, classes=3, seed=100 + trial,
                               separation=1.5)
            spec = archs.dnn_spec(5, InputView(), [8, 8], bottleneck=6,
                                  num_outputs=3)
            cfg = TrainConfig(epochs=1, lr0=0.3, seed=trial, minibatch_frames=16)
            pre_params = layerwise_pretrain(spec, data, cfg, per_stage_epochs=2)
            pre_loss, _ = evaluate(Network(spec, pre_params), data)
            rand_loss, _ = evaluate(Network(spec, init_params(spec, seed=cfg.seed)), data)
            wins += pre_loss <= rand_loss
        assert wins >= 9

    def test_no_hidden_layers_rejected(self):
        spec = NetworkSpec([net.softmax_output(4, 2)], InputView())
        with pytest.raises(ConfigError):
            pretrain_stages(spec)
