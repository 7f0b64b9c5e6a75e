"""Backoff n-gram language modeling: counting, Kneser-Ney estimation,
interpolation, merging, entropy pruning, ARPA I/O, perplexity."""

from .arpa import arpa_read, arpa_write
from .counts import CountTable, count_ngrams
from .interp import (
    InterpolationWeights,
    MixtureLm,
    interpolate_em,
    merge_interpolated,
)
from .kn import estimate_kn
from .model import BOS_LOG10, NGramModel, PerplexityReport, perplexity
from .prune import entropy_prune, pruning_divergence
from .vocab import BOS, EOS, UNK, Vocab

__all__ = [
    "arpa_read",
    "arpa_write",
    "CountTable",
    "count_ngrams",
    "InterpolationWeights",
    "MixtureLm",
    "interpolate_em",
    "merge_interpolated",
    "estimate_kn",
    "BOS_LOG10",
    "NGramModel",
    "PerplexityReport",
    "perplexity",
    "entropy_prune",
    "pruning_divergence",
    "BOS",
    "EOS",
    "UNK",
    "Vocab",
]
