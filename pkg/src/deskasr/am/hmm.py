"""Word-loop HMM topology and exact Viterbi decoding over it.

Words are left-to-right state chains with self-loops. The decoding graph
enters any word's first state uniformly, runs the chain, and (when the
word loop is enabled) jumps from a word-final state to any word-initial
state. State s of word w has global index w*states + s, so chains are
contiguous index ranges.
"""

from dataclasses import dataclass, field

import numpy as np

from .._kernels import viterbi_forward
from ..errors import ConfigError, DecodeError, ParseError


@dataclass(frozen=True)
class HmmTopology:
    words: tuple
    states_per_word: int = 3
    self_loop: float = 0.6
    loop: bool = True

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if len(self.words) == 0:
            raise ConfigError("topology needs at least one word")
        if len(set(self.words)) != len(self.words):
            raise ConfigError("duplicate words in topology")
        if self.states_per_word < 1:
            raise ConfigError("states_per_word must be >= 1")
        if not 0.0 <= self.self_loop < 1.0:
            raise ConfigError(f"self-loop prob must be in [0, 1), got {self.self_loop}")

    @property
    def num_words(self):
        return len(self.words)

    @property
    def num_states(self):
        return self.num_words * self.states_per_word

    def state_index(self, word_idx, position):
        return word_idx * self.states_per_word + position

    def word_of_state(self, state):
        return state // self.states_per_word

    def is_initial(self, state):
        return state % self.states_per_word == 0

    def is_final(self, state):
        return state % self.states_per_word == self.states_per_word - 1

    def initial_logprobs(self):
        """Uniform over word-initial states, -inf elsewhere."""
        init = np.full(self.num_states, -np.inf)
        for w in range(self.num_words):
            init[self.state_index(w, 0)] = -np.log(self.num_words)
        return init

    def final_states(self):
        return np.array(
            [self.state_index(w, self.states_per_word - 1)
             for w in range(self.num_words)]
        )

    def edges(self):
        """Sparse transition list sorted by (dst, src), duplicates merged max.

        Returns (src, dst, logp) int32/int32/float64 arrays. Outgoing mass
        per state: self_loop to itself, 1-self_loop forward along the
        chain; word-final states spread 1-self_loop uniformly over word
        starts when the loop is enabled.
        """
        log_loop = np.log(self.self_loop) if self.self_loop > 0 else -np.inf
        log_fwd = np.log1p(-self.self_loop)
        entries = {}

        def add(src, dst, logp):
            key = (dst, src)
            if key not in entries or entries[key] < logp:
                entries[key] = logp

        for s in range(self.num_states):
            if self.self_loop > 0:
                add(s, s, log_loop)
            if not self.is_final(s):
                add(s, s + 1, log_fwd)
            elif self.loop:
                spread = log_fwd - np.log(self.num_words)
                for w in range(self.num_words):
                    add(s, self.state_index(w, 0), spread)
        keys = sorted(entries)
        src = np.array([k[1] for k in keys], dtype=np.int32)
        dst = np.array([k[0] for k in keys], dtype=np.int32)
        logp = np.array([entries[k] for k in keys], dtype=np.float64)
        return src, dst, logp


@dataclass
class DecodeResult:
    words: list
    states: np.ndarray
    score: float


def viterbi_decode(scores, topology):
    """Best word sequence under the topology for one utterance's scores.

    scores: (T, num_states) frame scores (acoustic scores or true-model
    log-likelihoods). Ties break toward the lower state index. The path
    must end in a word-final state.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ConfigError("scores must be (T, S) with T >= 1")
    if scores.shape[1] != topology.num_states:
        raise ConfigError(
            f"scores cover {scores.shape[1]} states, topology has "
            f"{topology.num_states}"
        )
    src, dst, logp = topology.edges()
    delta, backptr = viterbi_forward(
        scores, topology.initial_logprobs(), src, dst, logp
    )
    finals = topology.final_states()
    final_scores = delta[-1, finals]
    if np.all(np.isneginf(final_scores)):
        raise DecodeError("no path reaches a word-final state")
    best_final = finals[int(np.argmax(final_scores))]
    path = np.empty(scores.shape[0], dtype=np.int64)
    path[-1] = best_final
    for t in range(scores.shape[0] - 1, 0, -1):
        prev = backptr[t, path[t]]
        if prev < 0:
            raise DecodeError(f"broken backpointer at frame {t}")
        path[t - 1] = prev
    return DecodeResult(states_to_words(path, topology), path,
                        float(delta[-1, best_final]))


def states_to_words(path, topology):
    """Collapse a state path to its word sequence.

    A new word starts at t=0 and at any final-state -> initial-state jump.
    For 1-state words a self-transition counts as a self-loop (no new
    word); that is the decoder's deterministic convention.
    """
    words = [topology.words[topology.word_of_state(path[0])]]
    for prev, cur in zip(path[:-1], path[1:]):
        if prev == cur:
            continue
        if topology.is_final(prev) and topology.is_initial(cur):
            words.append(topology.words[topology.word_of_state(cur)])
    return words


def write_topology(path, topology):
    with open(path, "w") as fh:
        fh.write(f"states_per_word {topology.states_per_word}\n")
        fh.write(f"self_loop {topology.self_loop!r}\n")
        fh.write(f"loop {'true' if topology.loop else 'false'}\n")
        for word in topology.words:
            fh.write(f"word {word}\n")


def read_topology(path):
    states_per_word, self_loop, loop = 3, 0.6, True
    words = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            key = parts[0]
            if key not in ("states_per_word", "self_loop", "loop", "word"):
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: missing value for {key}")
            try:
                if key == "states_per_word":
                    states_per_word = int(parts[1])
                elif key == "self_loop":
                    self_loop = float(parts[1])
                elif key == "loop":
                    loop = parts[1].lower() == "true"
                else:
                    words.append(parts[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad value ({exc})") from None
    if not words:
        raise ParseError(f"{path}: no words listed")
    return HmmTopology(tuple(words), states_per_word, self_loop, loop)
