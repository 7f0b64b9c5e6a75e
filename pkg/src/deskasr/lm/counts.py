"""N-gram counting with sentence-boundary padding."""

from collections import Counter
from dataclasses import dataclass

from ..errors import ConfigError, DataError
from .vocab import Vocab


@dataclass
class CountTable:
    """Raw n-gram counts for orders 1..order over id tuples.

    grams[k-1] maps k-gram id tuples to counts. Unigram counting skips
    <s> (it is conditioning-only), so the unigram token total equals the
    word-token count plus one </s> per sentence.
    """

    vocab: Vocab
    order: int
    grams: tuple

    def count(self, gram):
        gram = tuple(gram)
        return self.grams[len(gram) - 1].get(gram, 0)

    def total(self, k):
        return sum(self.grams[k - 1].values())

    def count_of_counts(self, k):
        """(n1, n2, n3, n4) over the raw k-gram counts."""
        coc = Counter(self.grams[k - 1].values())
        return tuple(coc.get(i, 0) for i in (1, 2, 3, 4))


def count_ngrams(sentences, order, vocab=None):
    """Count all n-grams of orders 1..order with <s>/</s> padding.

    sentences: iterable of token lists. Out-of-vocabulary tokens map to
    <unk> when an explicit vocab is given.
    """
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")
    sentences = [list(s) for s in sentences]
    if vocab is None:
        vocab = Vocab.from_corpus(sentences)
    if not sentences or all(len(s) == 0 for s in sentences):
        raise DataError("empty corpus: nothing to count")
    grams = [Counter() for _ in range(order)]
    for sent in sentences:
        padded = [vocab.bos_id] + vocab.encode(sent) + [vocab.eos_id]
        for k in range(1, order + 1):
            for i in range(len(padded) - k + 1):
                gram = tuple(padded[i : i + k])
                if k == 1 and gram[0] == vocab.bos_id:
                    continue
                grams[k - 1][gram] += 1
    return CountTable(vocab, order, tuple(dict(c) for c in grams))
