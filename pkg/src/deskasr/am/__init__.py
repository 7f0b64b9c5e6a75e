"""Acoustic-model decoding: word-loop HMM, Viterbi, priors, WER, synthesis."""

from .hmm import (
    DecodeResult,
    HmmTopology,
    read_topology,
    states_to_words,
    viterbi_decode,
    write_topology,
)
from .scoring import WerReport, acoustic_scores, estimate_priors, wer
from .synth import (
    SynthConfig,
    SynthCorpus,
    TrueModel,
    Utterance,
    bayes_report,
    corpus_wer,
    default_words,
    synth_corpus,
)

__all__ = [
    "DecodeResult",
    "HmmTopology",
    "read_topology",
    "states_to_words",
    "viterbi_decode",
    "write_topology",
    "WerReport",
    "acoustic_scores",
    "estimate_priors",
    "wer",
    "SynthConfig",
    "SynthCorpus",
    "TrueModel",
    "Utterance",
    "bayes_report",
    "corpus_wer",
    "default_words",
    "synth_corpus",
]
