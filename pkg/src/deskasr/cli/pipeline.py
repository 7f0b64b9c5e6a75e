"""Shared plumbing between the subcommands and the experiment runner:
canonical-row dataset construction, hybrid decoding of a corpus, and
word-process text sampling.
"""

import numpy as np

from ..am import acoustic_scores, estimate_priors, viterbi_decode
from ..am.synth import default_words
from ..errors import ConfigError
from ..features import canonical_rows
from ..nn import Minibatch
from ..trainer import FrameDataset


def corpus_dataset(corpus, context):
    """Stack a corpus into canonical-row training frames."""
    inputs, targets = corpus.frame_dataset(
        transform=lambda feats: canonical_rows(feats, context=context)
    )
    return FrameDataset(inputs, targets)


def _views_of(model):
    if hasattr(model, "spec"):  # a plain Network
        return [model.spec.view]
    if hasattr(model, "branches"):  # a joint model
        return [branch.view for branch in model.branches]
    raise ConfigError(f"cannot read input views from {type(model).__name__}")


def model_geometry(model):
    """(base_dim, context) of the canonical row a model was built on."""
    for view in _views_of(model):
        if view.kind != "identity":
            return view.base_dim, view.context
    raise ConfigError(
        "model declares no canonical-row view; pass the context explicitly"
    )


def decode_corpus(model, corpus, priors, kappa=1.0, context=None):
    """Hybrid Viterbi decode of every utterance -> {utt_id: words}."""
    if context is None:
        _, context = model_geometry(model)
    hyps = {}
    for utt in corpus.utterances:
        rows = canonical_rows(utt.features, context=context).data
        log_post = model.log_posteriors(Minibatch(rows))
        scores = acoustic_scores(log_post, priors, kappa=kappa)
        result = viterbi_decode(scores, corpus.topology)
        hyps[utt.utt_id] = result.words
    return hyps


def corpus_priors(corpus, alpha=0.5):
    return estimate_priors(
        corpus.alignments(), corpus.topology.num_states, alpha=alpha
    )


def sample_text(word_bigram, num_sentences, min_words, max_words, seed,
                words=None):
    """Sample sentences from a first-word-uniform / bigram word process.

    Mirrors how synthetic corpora draw their word sequences, so text
    sampled here is distributed like the corpus transcripts.
    """
    word_bigram = np.asarray(word_bigram, dtype=np.float64)
    vocab_size = word_bigram.shape[0]
    if words is None:
        words = default_words(vocab_size)
    if num_sentences < 1 or min_words < 1 or max_words < min_words:
        raise ConfigError("bad text sampling bounds")
    rng = np.random.default_rng([seed, 77])
    sentences = []
    for _ in range(num_sentences):
        length = int(rng.integers(min_words, max_words + 1))
        ids = [int(rng.integers(vocab_size))]
        for _ in range(length - 1):
            ids.append(int(rng.choice(vocab_size, p=word_bigram[ids[-1]])))
        sentences.append([words[i] for i in ids])
    return sentences
