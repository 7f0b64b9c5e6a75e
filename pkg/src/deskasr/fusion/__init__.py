"""Frame-level score fusion and joint-model construction."""

from .joint import (
    FusionSpec,
    JointBranch,
    JointModel,
    build_joint,
    load_joint,
    retrain_joint,
    save_joint,
    score_fuse,
)

__all__ = [
    "FusionSpec",
    "JointBranch",
    "JointModel",
    "build_joint",
    "load_joint",
    "retrain_joint",
    "save_joint",
    "score_fuse",
]
