"""Neural network language model and N-best rescoring."""

from .model import (
    NnlmConfig,
    NnlmModel,
    load_nnlm,
    nnlm_dataset,
    nnlm_logprob,
    save_nnlm,
    train_nnlm,
)
from .nbest import (
    GridSearchResult,
    NBestEntry,
    NBestList,
    RescoredEntry,
    RescoreResult,
    TrueWordLm,
    grid_search_weights,
    read_nbest,
    rescore_nbest,
    sentence_logprob10,
    synthetic_nbest,
    write_nbest,
)

__all__ = [
    "GridSearchResult",
    "NBestEntry",
    "NBestList",
    "NnlmConfig",
    "NnlmModel",
    "RescoreResult",
    "RescoredEntry",
    "TrueWordLm",
    "grid_search_weights",
    "load_nnlm",
    "nnlm_dataset",
    "nnlm_logprob",
    "read_nbest",
    "rescore_nbest",
    "save_nnlm",
    "sentence_logprob10",
    "synthetic_nbest",
    "train_nnlm",
    "write_nbest",
]
