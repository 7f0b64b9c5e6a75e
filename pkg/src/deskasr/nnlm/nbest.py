"""N-best lists, score combination, and weight search.

An N-best list substitutes for word lattices at this scale: each
utterance carries ranked hypotheses with a first-pass acoustic score
and LM score. Rescoring recombines

    total = w_am * am_score + w_lm * lm_log10 + wip * num_words

where lm_log10 is the log10 sentence probability under any scorer with
the shared token_logprobs interface — an n-gram model, a neural LM, or
a MixtureLm over several. Mixing happens per token in probability space
(log of the weighted sum), and the sentence score is the sum of the
mixed per-token log probabilities.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..am import wer
from ..errors import ConfigError, DataError, ParseError
from ..lm.vocab import Vocab

LN10 = math.log(10.0)


@dataclass(frozen=True)
class NBestEntry:
    words: tuple
    am_score: float
    lm_score: float

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not (math.isfinite(self.am_score) and math.isfinite(self.lm_score)):
            raise DataError("N-best scores must be finite")


@dataclass
class NBestList:
    """Ranked hypotheses per utterance, best first."""

    utts: dict  # utt_id -> tuple of NBestEntry

    def __post_init__(self):
        self.utts = {u: tuple(es) for u, es in self.utts.items()}
        for u, es in self.utts.items():
            if len(es) == 0:
                raise DataError(f"utterance {u!r} has no hypotheses")

    def __len__(self):
        return len(self.utts)

    def __getitem__(self, utt_id):
        return self.utts[utt_id]

    def utt_ids(self):
        return list(self.utts)


def write_nbest(path, nbest):
    """One line per hypothesis: utt_id rank am lm num_words w1 w2 ..."""
    with open(path, "w") as fh:
        for u, entries in nbest.utts.items():
            for rank, e in enumerate(entries, start=1):
                fields = [u, str(rank), repr(e.am_score), repr(e.lm_score),
                          str(len(e.words)), *e.words]
                fh.write(" ".join(fields) + "\n")


def read_nbest(path):
    utts = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 5:
                raise ParseError(f"{path}:{lineno}: expected at least 5 fields")
            utt_id, rank_s, am_s, lm_s, n_s = parts[:5]
            try:
                rank, n = int(rank_s), int(n_s)
                am, lm = float(am_s), float(lm_s)
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: bad numeric field"
                ) from None
            words = parts[5:]
            if len(words) != n:
                raise ParseError(
                    f"{path}:{lineno}: num_words says {n}, "
                    f"line has {len(words)}"
                )
            if not (math.isfinite(am) and math.isfinite(lm)):
                raise ParseError(f"{path}:{lineno}: non-finite score")
            entries = utts.setdefault(utt_id, [])
            if rank != len(entries) + 1:
                raise ParseError(
                    f"{path}:{lineno}: rank {rank} out of order for "
                    f"{utt_id!r} (expected {len(entries) + 1})"
                )
            entries.append(NBestEntry(tuple(words), am, lm))
    if not utts:
        raise ParseError(f"{path}: no hypotheses")
    return NBestList(utts)


def sentence_logprob10(scorer, words):
    """log10 sentence probability (words + </s>) under any scorer."""
    logprobs, _ = scorer.token_logprobs([list(words)])
    return float(logprobs.sum()) / LN10


@dataclass(frozen=True)
class RescoredEntry:
    words: tuple
    am_score: float
    lm_score: float  # rescoring LM log10 (not the first-pass column)
    total: float


@dataclass
class RescoreResult:
    lists: dict  # utt_id -> tuple of RescoredEntry, best first
    one_best: dict  # utt_id -> words tuple


def _check_weights(w_am, w_lm, wip):
    for name, w in (("w_am", w_am), ("w_lm", w_lm), ("wip", wip)):
        if not math.isfinite(w):
            raise ConfigError(f"{name} must be finite, got {w}")


def rescore_nbest(nbest, scorer, w_am=1.0, w_lm=1.0, wip=0.0):
    """Re-rank every utterance by the combined score.

    scorer: anything with token_logprobs (NGramModel, NnlmModel, or a
    MixtureLm combining both); may be None when w_lm == 0. The sort is
    stable and descending, so ties keep the original rank order.
    """
    _check_weights(w_am, w_lm, wip)
    if len(nbest.utts) == 0:
        raise DataError("empty N-best list")
    if scorer is None and w_lm != 0.0:
        raise ConfigError("w_lm != 0 requires a scorer")
    lists = {}
    one_best = {}
    for u, entries in nbest.utts.items():
        rescored = []
        for e in entries:
            lm10 = (
                sentence_logprob10(scorer, e.words)
                if scorer is not None else 0.0
            )
            total = w_am * e.am_score + w_lm * lm10 + wip * len(e.words)
            rescored.append(RescoredEntry(e.words, e.am_score, lm10, total))
        order = sorted(
            range(len(rescored)), key=lambda i: (-rescored[i].total, i)
        )
        ranked = tuple(rescored[i] for i in order)
        lists[u] = ranked
        one_best[u] = ranked[0].words
    return RescoreResult(lists, one_best)


@dataclass(frozen=True)
class GridSearchResult:
    w_am: float
    w_lm: float
    wip: float
    wer: float
    table: tuple  # ((w_am, w_lm, wip, wer), ...) in evaluation order


DEFAULT_W_AM = (1.0,)
DEFAULT_W_LM = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_WIP = (0.0, -0.5, 0.5)


def grid_search_weights(nbest, references, scorer,
                        w_am_grid=DEFAULT_W_AM, w_lm_grid=DEFAULT_W_LM,
                        wip_grid=DEFAULT_WIP):
    """Pick (w_am, w_lm, wip) minimizing WER of the rescored 1-best.

    references: utt_id -> word sequence. LM scores are computed once per
    hypothesis; the grid is pure arithmetic on cached (am, lm, words)
    triples. Ties keep the first grid point in iteration order, which
    includes the degenerate AM-only point when 0 is in the w_lm grid.
    """
    if len(nbest.utts) == 0:
        raise DataError("empty N-best list")
    missing = [u for u in nbest.utts if u not in references]
    if missing:
        raise DataError(f"no reference for utterances {missing!r}")
    cached = {}
    for u, entries in nbest.utts.items():
        am = np.array([e.am_score for e in entries])
        lm = np.array([sentence_logprob10(scorer, e.words) for e in entries])
        n = np.array([len(e.words) for e in entries], dtype=np.float64)
        cached[u] = (am, lm, n, [e.words for e in entries])
    table = []
    best = None
    for w_am in w_am_grid:
        for w_lm in w_lm_grid:
            for wip in wip_grid:
                _check_weights(w_am, w_lm, wip)
                report = None
                for u, (am, lm, n, words) in cached.items():
                    totals = w_am * am + w_lm * lm + wip * n
                    hyp = words[int(np.argmax(totals))]
                    r = wer(references[u], hyp)
                    report = r if report is None else report + r
                point = (w_am, w_lm, wip, report.rate)
                table.append(point)
                if best is None or point[3] < best[3]:
                    best = point
    return GridSearchResult(best[0], best[1], best[2], best[3], tuple(table))


class TrueWordLm:
    """The synthetic generator's own word process as a scorer.

    First word uniform over the vocabulary, subsequent words by the
    generator's bigram rows (uniform rows for the uniform process).
    </s> contributes log-probability 0 so sentence scores stay
    comparable across hypotheses without modeling termination, which the
    generator does by drawing a length, not by emitting a stop symbol.
    """

    def __init__(self, words, word_bigram):
        self.vocab = Vocab(words)
        self.order = 2
        bigram = np.asarray(word_bigram, dtype=np.float64)
        if bigram.shape != (len(words), len(words)):
            raise ConfigError("word_bigram must be (V, V)")
        self._log_bigram = np.log(bigram)
        self._gen_index = {self.vocab.id(w): i for i, w in enumerate(words)}
        self._log_uniform = -math.log(len(words))

    def logprob_ids(self, history, word):
        word = int(word)
        if word == self.vocab.eos_id:
            return 0.0
        cur = self._gen_index.get(word)
        if cur is None:
            return self._log_uniform
        hist = [int(h) for h in history if int(h) != self.vocab.bos_id]
        prev = self._gen_index.get(hist[-1]) if hist else None
        if prev is None:
            return self._log_uniform
        return float(self._log_bigram[prev, cur])

    def token_logprobs(self, sentences, oov_policy="score-unk"):
        if oov_policy not in ("score-unk", "skip"):
            raise ConfigError(f"unknown OOV policy {oov_policy!r}")
        out = []
        oov = 0
        for sent in sentences:
            prev = None
            for tok in sent:
                is_oov = tok not in self.vocab
                if is_oov:
                    oov += 1
                cur = self._gen_index.get(self.vocab.id(tok))
                if not (is_oov and oov_policy == "skip"):
                    if prev is None or cur is None:
                        out.append(self._log_uniform)
                    else:
                        out.append(float(self._log_bigram[prev, cur]))
                prev = cur
            out.append(0.0)  # </s>
        return np.array(out), oov


def _forced_alignment_logprob(scores, word_ids, states_per_word, self_loop):
    """Best-path acoustic log score of one hypothesis's linear state chain.

    Includes the duration model (log(self_loop) to stay, log(1 -
    self_loop) to advance) but no word priors, so the language model's
    contribution lives entirely in the separate LM column and is not
    double counted when rescoring recombines the two. Returns -inf when
    the hypothesis has more states than frames.
    """
    t_len = scores.shape[0]
    chain = [
        w * states_per_word + s
        for w in word_ids
        for s in range(states_per_word)
    ]
    j_len = len(chain)
    if j_len == 0 or t_len < j_len:
        return -math.inf
    stay = math.log(self_loop) if self_loop > 0 else -math.inf
    advance = math.log1p(-self_loop)
    delta = np.full(j_len, -math.inf)
    delta[0] = scores[0, chain[0]]
    col = scores[:, chain]
    for t in range(1, t_len):
        moved = np.full(j_len, -math.inf)
        moved[1:] = delta[:-1] + advance
        delta = np.maximum(delta + stay, moved) + col[t]
    return float(delta[-1])


def synthetic_nbest(corpus, n_alt=8, seed=0, include_reference=True):
    """Corrupted-reference N-best lists scored by the true acoustic model.

    Each utterance's hypothesis set holds the reference plus random
    single-word substitutions, deletions, and insertions, ranked by the
    acoustic forced-alignment score under the generator's emission model;
    the first-pass LM column carries the uniform per-word score that a
    loop decoder's word-entry arcs would contribute. The same
    (corpus, seed) pair always produces the same lists.
    """
    cfg = corpus.config
    words = [f"w{i}" for i in range(cfg.vocab_size)]
    rng = np.random.default_rng([seed, 271])
    lm10_per_word = -math.log10(cfg.vocab_size)
    utts = {}
    for u in corpus.utterances:
        scores = corpus.model.frame_logliks(u.features)
        seen = set()
        hyps = []

        def consider(word_seq):
            word_seq = tuple(word_seq)
            if not word_seq or word_seq in seen:
                return
            seen.add(word_seq)
            ids = [words.index(w) for w in word_seq]
            am = _forced_alignment_logprob(
                scores, ids, cfg.states_per_word, cfg.self_loop
            )
            if math.isfinite(am):
                hyps.append((word_seq, am))

        if include_reference:
            consider(u.words)
        guard = 0
        while len(hyps) < n_alt + 1 and guard < 20 * (n_alt + 1):
            guard += 1
            alt = list(u.words)
            op = rng.choice(3)
            pos = int(rng.integers(len(alt)))
            if op == 0:
                alt[pos] = words[int(rng.integers(cfg.vocab_size))]
            elif op == 1 and len(alt) > 1:
                del alt[pos]
            else:
                alt.insert(pos, words[int(rng.integers(cfg.vocab_size))])
            consider(alt)
        hyps.sort(key=lambda h: -h[1])
        utts[u.utt_id] = tuple(
            NBestEntry(ws, am, lm10_per_word * len(ws)) for ws, am in hyps
        )
    return NBestList(utts)
