"""Closed vocabulary with sentence-boundary and unknown-word symbols."""

from ..errors import DataError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SPECIALS = (BOS, EOS, UNK)


class Vocab:
    """Token <-> id mapping. Ids 0..2 are <s>, </s>, <unk>; the remaining
    tokens are sorted so construction is deterministic."""

    def __init__(self, words=()):
        rest = sorted(set(words) - set(SPECIALS))
        self._tokens = SPECIALS + tuple(rest)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}

    @classmethod
    def from_corpus(cls, sentences):
        words = [w for sent in sentences for w in sent]
        if not words:
            raise DataError("empty corpus: no tokens to build a vocabulary")
        return cls(words)

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._tokens == other._tokens

    @property
    def tokens(self):
        return self._tokens

    @property
    def bos_id(self):
        return 0

    @property
    def eos_id(self):
        return 1

    @property
    def unk_id(self):
        return 2

    def id(self, token):
        """Id of token, mapping out-of-vocabulary tokens to <unk>."""
        return self._ids.get(token, self.unk_id)

    def token(self, idx):
        return self._tokens[idx]

    def encode(self, sentence):
        return [self.id(tok) for tok in sentence]

    def predicted_ids(self):
        """Every id a model must assign probability to (<s> is
        conditioning-only and never predicted)."""
        return [i for i in range(len(self._tokens)) if i != self.bos_id]
