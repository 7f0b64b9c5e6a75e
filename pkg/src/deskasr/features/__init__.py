"""Acoustic front end: logmel, deltas, splicing, CMVN, LDA, and file I/O."""

from .frontend import (
    FeatureMatrix,
    Waveform,
    add_deltas,
    canonical_rows,
    cmvn,
    frame_count,
    logmel,
    mel_filterbank,
    splice,
)
from .lda import LdaTransform, estimate_lda, scatter_matrices
from .fio import (
    read_alignments,
    read_features,
    read_waveform,
    write_alignments,
    write_features,
    write_waveform,
)

__all__ = [
    "FeatureMatrix",
    "LdaTransform",
    "Waveform",
    "add_deltas",
    "canonical_rows",
    "cmvn",
    "estimate_lda",
    "frame_count",
    "logmel",
    "mel_filterbank",
    "read_alignments",
    "read_features",
    "read_waveform",
    "scatter_matrices",
    "splice",
    "write_alignments",
    "write_features",
    "write_waveform",
]
