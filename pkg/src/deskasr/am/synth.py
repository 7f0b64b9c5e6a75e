"""Synthetic corpus: a known generative word-HMM with Gaussian emissions.

Desk-scale stand-in for real conversational audio. Because the generator
is known exactly, a Bayes-oracle decode bounds what any trained model can
achieve, which anchors the end-to-end accuracy checks.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .hmm import DecodeResult, HmmTopology, viterbi_decode


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 10
    states_per_word: int = 3
    feat_dim: int = 40
    self_loop: float = 0.6
    num_utts: int = 50
    min_words: int = 3
    max_words: int = 8
    mean_scale: float = 0.7
    emission_std: float = 1.0
    word_process: str = "uniform"  # or "bigram"
    bigram_concentration: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 1 or self.states_per_word < 1 or self.feat_dim < 1:
            raise ConfigError("vocab_size, states_per_word, feat_dim must be >= 1")
        if not 0.0 <= self.self_loop < 1.0:
            raise ConfigError(f"self_loop must be in [0, 1), got {self.self_loop}")
        if self.num_utts < 1:
            raise ConfigError("num_utts must be >= 1")
        if not 1 <= self.min_words <= self.max_words:
            raise ConfigError("need 1 <= min_words <= max_words")
        if self.emission_std <= 0:
            raise ConfigError("emission_std must be > 0")
        if self.word_process not in ("uniform", "bigram"):
            raise ConfigError(f"unknown word process {self.word_process!r}")


@dataclass
class TrueModel:
    """The generator's own parameters, exposed for oracle scoring."""

    topology: HmmTopology
    state_means: np.ndarray
    emission_std: float
    word_bigram: np.ndarray  # (V, V) row-stochastic; uniform process uses 1/V

    def frame_logliks(self, frames):
        """(T, S) log N(x; mean_s, std^2 I) for every state."""
        x = np.asarray(frames, dtype=np.float64)
        d = x.shape[1]
        var = self.emission_std**2
        sq = (
            (x**2).sum(axis=1)[:, None]
            - 2.0 * x @ self.state_means.T
            + (self.state_means**2).sum(axis=1)[None, :]
        )
        return -0.5 * (d * np.log(2 * np.pi * var) + sq / var)

    def bayes_decode(self, frames):
        """Viterbi with the true emission model over the decode topology."""
        return viterbi_decode(self.frame_logliks(frames), self.topology)

    def bayes_frame_states(self, frames):
        """Pointwise most likely state per frame (uniform state prior)."""
        return self.frame_logliks(frames).argmax(axis=1)


@dataclass
class Utterance:
    utt_id: str
    features: np.ndarray
    states: np.ndarray
    words: list


@dataclass
class SynthCorpus:
    config: SynthConfig
    topology: HmmTopology
    model: TrueModel
    utterances: list

    def alignments(self):
        return [(u.utt_id, u.states) for u in self.utterances]

    def references(self):
        return [(u.utt_id, u.words) for u in self.utterances]

    def sentences(self):
        """Word sequences only, for LM training."""
        return [u.words for u in self.utterances]

    def frame_dataset(self, transform=None):
        """Stacked (inputs, targets) arrays; transform maps each utterance's
        static features to network input rows (e.g. the canonical-row
        builder)."""
        xs, ys = [], []
        for u in self.utterances:
            x = u.features if transform is None else transform(u.features)
            if not isinstance(x, np.ndarray):  # e.g. a FeatureMatrix
                x = np.asarray(x.data, dtype=np.float64)
            xs.append(x)
            ys.append(u.states)
        return np.vstack(xs), np.concatenate(ys)


def default_words(vocab_size):
    return tuple(f"w{i}" for i in range(vocab_size))


def synth_corpus(config, seed=None):
    """Sample a corpus from the configured generative model.

    Identical (config, seed) pairs produce bit-identical corpora. The
    returned object carries the true model for oracle scoring.
    """
    if seed is None:
        seed = config.seed
    rng = np.random.default_rng([seed, 42])
    topo = HmmTopology(
        default_words(config.vocab_size),
        config.states_per_word,
        config.self_loop,
        loop=True,
    )
    means = rng.standard_normal((topo.num_states, config.feat_dim))
    means *= config.mean_scale
    if config.word_process == "bigram":
        bigram = rng.dirichlet(
            np.full(config.vocab_size, config.bigram_concentration),
            size=config.vocab_size,
        )
    else:
        bigram = np.full(
            (config.vocab_size, config.vocab_size), 1.0 / config.vocab_size
        )
    model = TrueModel(topo, means, config.emission_std, bigram)

    utterances = []
    for n in range(config.num_utts):
        length = int(rng.integers(config.min_words, config.max_words + 1))
        word_ids = []
        for k in range(length):
            if config.word_process == "bigram" and k > 0:
                word_ids.append(int(rng.choice(config.vocab_size,
                                               p=bigram[word_ids[-1]])))
            else:
                word_ids.append(int(rng.integers(config.vocab_size)))
        states = []
        for w in word_ids:
            for pos in range(config.states_per_word):
                s = topo.state_index(w, pos)
                duration = int(rng.geometric(1.0 - config.self_loop))
                states.extend([s] * duration)
        states = np.array(states, dtype=np.int64)
        frames = means[states] + config.emission_std * rng.standard_normal(
            (states.size, config.feat_dim)
        )
        utterances.append(
            Utterance(
                f"utt{n:04d}",
                frames,
                states,
                [topo.words[w] for w in word_ids],
            )
        )
    return SynthCorpus(config, topo, model, utterances)


def corpus_wer(corpus, hypotheses):
    """Aggregate WER of {utt_id: word list} hypotheses against references."""
    from .scoring import WerReport, wer

    total = WerReport(0, 0, 0, 0)
    for utt_id, ref in corpus.references():
        total = total + wer(ref, hypotheses[utt_id])
    return total


def bayes_report(corpus):
    """Oracle WER and pointwise frame accuracy of the true model."""
    from .scoring import WerReport, wer

    total = WerReport(0, 0, 0, 0)
    hit = 0
    frames = 0
    for u in corpus.utterances:
        result = corpus.model.bayes_decode(u.features)
        total = total + wer(u.words, result.words)
        hit += int((corpus.model.bayes_frame_states(u.features) == u.states).sum())
        frames += u.states.size
    return total, hit / frames
