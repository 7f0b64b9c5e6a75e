"""SGD cross-entropy training with frame randomization and schedules.

The driver is duck-typed: anything exposing minibatch_loss_and_grads /
sgd_step / eval_loss_accuracy can be trained, so plain networks, fused
joint models and the neural LM all share this loop.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..nn.network import Minibatch, NetworkSpec, init_params
from ..nn import network as net


@dataclass
class FrameDataset:
    """Training frames with aligned target ids, kept as flat arrays."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ShapeError("dataset inputs must be a (frames, dim) array")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ShapeError("one target id per frame required")

    def __len__(self):
        return self.inputs.shape[0]

    def minibatch(self, idx):
        return Minibatch(self.inputs[idx], self.targets[idx])


@dataclass(frozen=True)
class DropoutSchedule:
    """Linearly annealed dropout: rate p0 at epoch 0, 0 at end_epoch."""

    p0: float = 0.5
    end_epoch: int = 9
    shape: str = "linear"

    def __post_init__(self):
        if not 0.0 <= self.p0 < 1.0:
            raise ConfigError(f"initial dropout rate must be in [0, 1), got {self.p0}")
        if self.end_epoch < 1:
            raise ConfigError(f"end_epoch must be >= 1, got {self.end_epoch}")
        if self.shape != "linear":
            raise ConfigError(f"unknown dropout schedule shape {self.shape!r}")


def anneal_rate(schedule, epoch):
    """Dropout rate for the given epoch: max(0, p0 * (1 - epoch/end_epoch))."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    if schedule is None:
        return 0.0
    return max(0.0, schedule.p0 * (1.0 - epoch / schedule.end_epoch))


def default_end_epoch(epochs):
    """Annealing endpoint used when a config enables dropout without one."""
    return max(1, -(-3 * epochs // 4))  # ceil(0.75 * epochs)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of an SGD run.

    epochs=0 is the degenerate evaluation-only run (empty history).
    """

    epochs: int = 12
    minibatch_frames: int = 250
    lr0: float = 0.1
    lr_decay: float = 0.8
    seed: int = 0
    dropout: DropoutSchedule = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.minibatch_frames < 1:
            raise ConfigError(
                f"minibatch_frames must be >= 1, got {self.minibatch_frames}"
            )
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be > 0, got {self.lr0}")
        if self.lr_decay <= 0:
            raise ConfigError(f"lr_decay must be > 0, got {self.lr_decay}")


def lr_at(config, epoch):
    """Constant within an epoch, multiplied by lr_decay each epoch."""
    return config.lr0 * config.lr_decay**epoch


def sgd_epoch(model, dataset, config, epoch):
    """One pass over all frames in a fresh (seed, epoch) permutation.

    Returns (params, mean pre-update CE loss). The model is updated in
    place; the last partial minibatch is processed, not dropped.
    """
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    perm = np.random.default_rng([config.seed, epoch]).permutation(n)
    rate = anneal_rate(config.dropout, epoch)
    mask_rng = np.random.default_rng([config.seed, epoch, 101])
    lr = lr_at(config, epoch)
    total = 0.0
    for start in range(0, n, config.minibatch_frames):
        idx = perm[start : start + config.minibatch_frames]
        mb = dataset.minibatch(idx)
        loss, grads = model.minibatch_loss_and_grads(
            mb, dropout_rate=rate, rng=mask_rng
        )
        model.sgd_step(grads, lr)
        total += loss * len(idx)
    return getattr(model, "params", None), total / n


def evaluate(model, dataset, batch_frames=4096):
    """Chunked eval-mode (loss, frame accuracy) over a whole dataset."""
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot evaluate an empty dataset")
    loss_sum = 0.0
    acc_sum = 0.0
    for start in range(0, n, batch_frames):
        idx = np.arange(start, min(start + batch_frames, n))
        loss, acc = model.eval_loss_accuracy(dataset.minibatch(idx))
        loss_sum += loss * len(idx)
        acc_sum += acc * len(idx)
    return loss_sum / n, acc_sum / n


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    dropout_rate: float
    lr: float
    loss: float
    frame_accuracy: float


def train(model, dataset, config, eval_dataset=None):
    """Run config.epochs of SGD; returns the per-epoch history.

    Loss is the mean pre-update training CE of the epoch; frame accuracy
    is measured after the epoch on eval_dataset (the training set when
    none is given).
    """
    held_out = eval_dataset if eval_dataset is not None else dataset
    history = []
    for epoch in range(config.epochs):
        _, loss = sgd_epoch(model, dataset, config, epoch)
        _, acc = evaluate(model, held_out)
        history.append(
            EpochStats(
                epoch=epoch,
                dropout_rate=anneal_rate(config.dropout, epoch),
                lr=lr_at(config, epoch),
                loss=loss,
                frame_accuracy=acc,
            )
        )
    return history


HISTORY_FIELDS = ("epoch", "dropout_rate", "lr", "loss", "frame_accuracy")


def write_history(path, history):
    """Per-epoch training stats as CSV (epoch, dropout_rate, lr, loss, acc)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow(
                [row.epoch, f"{row.dropout_rate:.6f}", f"{row.lr:.8f}",
                 f"{row.loss:.8f}", f"{row.frame_accuracy:.6f}"]
            )


def read_history(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [
        EpochStats(int(r["epoch"]), float(r["dropout_rate"]), float(r["lr"]),
                   float(r["loss"]), float(r["frame_accuracy"]))
        for r in rows
    ]


def pretrain_stages(spec):
    """Layer-index blocks for layerwise discriminative pretraining.

    Stage k spans the input through the k-th parameterized hidden layer
    plus its following nonparametric layers; a temporary softmax output
    sits on top. The last stage covers every hidden layer, so its output
    layer coincides with the real one.
    """
    param_idx = spec.hidden_param_layers()
    if not param_idx:
        raise ConfigError("network has no hidden layers to pretrain")
    stages = []
    for k, start in enumerate(param_idx):
        end = param_idx[k + 1] if k + 1 < len(param_idx) else len(spec.layers) - 1
        stages.append(list(range(0, end)))
    return stages


def layerwise_pretrain(spec, dataset, config, per_stage_epochs=1):
    """Grow the network one hidden layer at a time, training each stage.

    Temporary output layers of the intermediate stages are discarded;
    trained hidden layers carry over. Returns params for the full spec
    (the final stage trains the real output layer in place).
    """
    from ..nn.network import Network  # local to avoid import cycle

    full_params = init_params(spec, seed=config.seed)
    stages = pretrain_stages(spec)
    stage_cfg = TrainConfig(
        epochs=per_stage_epochs,
        minibatch_frames=config.minibatch_frames,
        lr0=config.lr0,
        lr_decay=config.lr_decay,
        seed=config.seed,
        dropout=config.dropout,
    )
    for stage_no, block in enumerate(stages):
        last = stage_no == len(stages) - 1
        layers = [spec.layers[i] for i in block]
        if last:
            layers.append(spec.layers[-1])
        else:
            layers.append(net.softmax_output(layers[-1].output_dim, spec.num_outputs))
        sub_spec = NetworkSpec(layers, spec.view, spec.embedding_dim)
        sub_params = [full_params[i] for i in block]
        if last:
            sub_params.append(full_params[-1])
        else:
            tmp = init_params(sub_spec, seed=int(
                np.random.default_rng([config.seed, 7000 + stage_no]).integers(2**31)
            ))
            sub_params.append(tmp[-1])
        model = Network(sub_spec, sub_params)
        for epoch in range(per_stage_epochs):
            sgd_epoch(model, dataset, stage_cfg, epoch)
        for j, i in enumerate(block):
            full_params[i] = model.params[j]
        if last:
            full_params[-1] = model.params[-1]
    return full_params
