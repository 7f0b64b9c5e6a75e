"""Backoff n-gram model: storage, scoring, perplexity.

Log probabilities and backoff weights are natural logs internally; the
ARPA layer converts to and from log10 at the file boundary.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from .vocab import Vocab

BOS_LOG10 = -99.0  # conventional stand-in for the unscorable <s> unigram
OOV_POLICIES = ("score-unk", "skip")


@dataclass
class NGramModel:
    """probs[k-1]: k-gram id tuple -> log prob. bows[L-1]: history tuple of
    length L -> log backoff weight (missing history = weight 1)."""

    vocab: Vocab
    order: int
    probs: list
    bows: list
    discounts: tuple = ()  # per order: (D1, D2, D3+) or None
    fallback: tuple = ()  # per order: True when fixed-discount fallback fired

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError(f"order must be >= 1, got {self.order}")
        if len(self.probs) != self.order or len(self.bows) != self.order - 1:
            raise ConfigError(
                "need probs for orders 1..n and bows for histories 1..n-1"
            )

    def ngram_count(self, k):
        return len(self.probs[k - 1])

    def size(self):
        return sum(len(p) for p in self.probs)

    def logprob_ids(self, history, word):
        """Natural-log p(word | history), backing off as needed. The
        history is truncated to the model order."""
        h = tuple(history)
        if len(h) > self.order - 1:
            h = h[len(h) - self.order + 1 :]
        return self._lp(h, word)

    def _lp(self, h, w):
        p = self.probs[len(h)].get(h + (w,))
        if p is not None:
            return p
        if not h:
            return -math.inf  # absent even from the unigram table
        bow = self.bows[len(h) - 1].get(h, 0.0)
        return bow + self._lp(h[1:], w)

    def logprob(self, history_tokens, word_token):
        """Natural-log p(word | history) over raw token strings."""
        return self.logprob_ids(
            [self.vocab.id(t) for t in history_tokens],
            self.vocab.id(word_token),
        )

    def conditional_mass(self, history_ids):
        """Sum of p(w | history) over every predictable vocab word.

        1 +/- 1e-6 for any history of a well-formed model.
        """
        return float(
            sum(
                math.exp(self.logprob_ids(history_ids, w))
                for w in self.vocab.predicted_ids()
            )
        )

    def stored_histories(self):
        """Every history with explicit continuations, all orders."""
        out = set()
        for k in range(2, self.order + 1):
            out |= {g[:-1] for g in self.probs[k - 1]}
        out.add(())
        return out

    def token_logprobs(self, sentences, oov_policy="score-unk"):
        """Per-token natural logprobs of the padded text.

        </s> is scored, <s> only conditions. OOV tokens map to <unk> and
        are scored ("score-unk") or omitted from scoring ("skip"); either
        way they advance the history and are tallied. Returns
        (logprobs array, oov_count).
        """
        if oov_policy not in OOV_POLICIES:
            raise ConfigError(f"unknown OOV policy {oov_policy!r}")
        out = []
        oov = 0
        for sent in sentences:
            ctx = [self.vocab.bos_id]
            for tok in list(sent) + [self.vocab.token(self.vocab.eos_id)]:
                is_oov = tok not in self.vocab
                wid = self.vocab.id(tok)
                if is_oov:
                    oov += 1
                if not (is_oov and oov_policy == "skip"):
                    out.append(self.logprob_ids(ctx, wid))
                ctx.append(wid)
                if len(ctx) > self.order - 1 and self.order > 1:
                    ctx = ctx[-(self.order - 1) :]
        return np.array(out), oov


@dataclass
class PerplexityReport:
    ppl: float
    logprob10: float
    tokens: int
    oov_count: int


def perplexity(model, sentences, oov_policy="score-unk"):
    """ppl = 10^(-logprob10 / scored tokens)."""
    logprobs, oov = model.token_logprobs(sentences, oov_policy=oov_policy)
    if logprobs.size == 0:
        raise DataError("no scorable tokens")
    logprob10 = float(logprobs.sum()) / math.log(10.0)
    ppl = 10.0 ** (-logprob10 / logprobs.size)
    return PerplexityReport(ppl, logprob10, int(logprobs.size), int(oov))
