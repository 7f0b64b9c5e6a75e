"""SGD training: schedules, the epoch driver, and layerwise pretraining."""

from .training import (
    DropoutSchedule,
    EpochStats,
    FrameDataset,
    HISTORY_FIELDS,
    TrainConfig,
    anneal_rate,
    default_end_epoch,
    evaluate,
    layerwise_pretrain,
    lr_at,
    pretrain_stages,
    read_history,
    sgd_epoch,
    train,
    write_history,
)

__all__ = [
    "DropoutSchedule",
    "EpochStats",
    "FrameDataset",
    "HISTORY_FIELDS",
    "TrainConfig",
    "anneal_rate",
    "default_end_epoch",
    "evaluate",
    "layerwise_pretrain",
    "lr_at",
    "pretrain_stages",
    "read_history",
    "sgd_epoch",
    "train",
    "write_history",
]
