"""Entropy-based pruning of backoff n-gram models.

For each candidate n-gram (orders >= 2; unigrams are never pruned) the
weighted relative entropy between the model and the model with that one
entry removed is computed in closed form: removing (h, w0) re-solves
h's backoff weight, which rescales exactly the non-explicit words,
leaving other explicit entries untouched. The history marginal p(h) is
the chain product of model probabilities over h's tokens, with <s>
contributing factor 1 (it anchors sentence starts rather than being
predicted). Entries whose divergence falls strictly below the threshold
are pruned, except entries that still serve as the history of a
surviving higher-order entry, which must be kept for the backoff
representation to stay well-formed. All divergences are measured
against the original model in one pass, so the surviving set shrinks
monotonically as the threshold grows.
"""

import math

from ..errors import ConfigError
from .model import NGramModel


def _history_marginal(model, h):
    p = 1.0
    for i, w in enumerate(h):
        if w == model.vocab.bos_id:
            continue
        p *= math.exp(model.logprob_ids(h[:i], w))
    return p


def _by_history(prob_dict):
    out = {}
    for g, lp in prob_dict.items():
        out.setdefault(g[:-1], []).append((g[-1], lp))
    return out


def _history_divergences(model, h, entries):
    """{gram: divergence} for all explicit continuations of history h."""
    k = len(h) + 1
    p_low = {w: math.exp(model._lp(h[1:], w)) for w, _ in entries}
    num = 1.0 - sum(math.exp(lp) for _, lp in entries)
    den = 1.0 - sum(p_low.values())
    bow = math.exp(model.bows[k - 2].get(h, 0.0))
    p_h = _history_marginal(model, h)
    out = {}
    for w0, lp0 in entries:
        p0 = math.exp(lp0)
        bow2 = (num + p0) / (den + p_low[w0])
        kl = p0 * (lp0 - math.log(bow2 * p_low[w0]))
        if num > 0.0 and bow > 0.0:
            kl += num * (math.log(bow) - math.log(bow2))
        out[h + (w0,)] = p_h * kl
    return out


def pruning_divergence(model, gram):
    """Weighted KL increase from removing one explicit n-gram.

    Exposed separately so it can be checked against a brute-force
    enumeration over the vocabulary.
    """
    gram = tuple(gram)
    h = gram[:-1]
    entries = _by_history(model.probs[len(gram) - 1])[h]
    return _history_divergences(model, h, entries)[gram]


def entropy_prune(model, threshold):
    """Prune every n-gram whose removal costs less than threshold.

    threshold 0 leaves the model unchanged (the divergence is
    non-negative and the comparison is strict); threshold = inf reduces
    the model to its unigrams.
    """
    if not threshold >= 0:
        raise ConfigError(f"threshold must be >= 0, got {threshold}")
    keep = [set(p) for p in model.probs]
    if threshold > 0:
        protected = set()
        for k in range(model.order, 1, -1):
            surviving = set()
            for h, entries in _by_history(model.probs[k - 1]).items():
                divergences = _history_divergences(model, h, entries)
                for g, div in divergences.items():
                    if g in protected or not div < threshold:
                        surviving.add(g)
            keep[k - 1] = surviving
            protected = {g[:-1] for g in surviving}

    probs = [
        {g: lp for g, lp in model.probs[k].items() if g in keep[k]}
        for k in range(model.order)
    ]
    bows = [dict() for _ in range(model.order - 1)]
    pruned = NGramModel(model.vocab, model.order, probs, bows,
                        model.discounts, model.fallback)
    for k in range(2, model.order + 1):
        for h, entries in sorted(_by_history(probs[k - 1]).items()):
            num = 1.0
            den = 1.0
            for w, lp in entries:
                num -= math.exp(lp)
                den -= math.exp(pruned._lp(h[1:], w))
            if den <= 1e-12 or num <= 0.0:
                bows[k - 2][h] = 0.0
            else:
                bows[k - 2][h] = math.log(num / den)
    return pruned
