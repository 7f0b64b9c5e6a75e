"""Command-line entry point and the config-driven experiment runner."""

from .commands import build_parser, main
from .config import (
    ExperimentConfig,
    ModelConfig,
    load_experiment_config,
    read_config,
    resolve_out_dir,
)
from .experiment import StageError, run_experiment
from .iofmt import (
    load_corpus_dir,
    read_sentences,
    read_transcripts,
    write_corpus_dir,
    write_sentences,
    write_transcripts,
)

__all__ = [
    "ExperimentConfig",
    "ModelConfig",
    "StageError",
    "build_parser",
    "load_corpus_dir",
    "load_experiment_config",
    "main",
    "read_config",
    "read_sentences",
    "read_transcripts",
    "resolve_out_dir",
    "run_experiment",
    "write_corpus_dir",
    "write_sentences",
    "write_transcripts",
]
