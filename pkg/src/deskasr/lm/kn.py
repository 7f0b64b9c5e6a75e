"""Modified interpolated Kneser-Ney estimation.

Per order, three discounts (for counts 1, 2, >=3) are derived from the
count-of-counts:

    Y = n1 / (n1 + 2 n2)
    D1 = 1 - 2 Y n2 / n1,  D2 = 2 - 3 Y n3 / n2,  D3+ = 3 - 4 Y n4 / n3

falling back to a fixed D = 0.75 (flagged in the model metadata) when
any of n1..n4 is zero or a formula discount leaves its valid range.
Lower orders are estimated from continuation counts, except n-grams
starting with <s>, which keep raw counts (nothing can precede <s>). The
recursion bottoms out in the uniform distribution over the predicted
vocabulary, so every word — <unk> included — gets positive probability
in every context. The interpolated model is stored in the standard
backoff representation: explicit probabilities already contain the
interpolation mass, and each history's backoff weight equals its
leftover-mass constant gamma(h).
"""

import math
from collections import Counter

from ..errors import ConfigError
from .model import BOS_LOG10, NGramModel

FALLBACK_D = 0.75


def _order_discounts(count_values):
    """((D1, D2, D3+), fallback_flag) for one order's estimation counts."""
    coc = Counter(count_values)
    n1, n2, n3, n4 = (coc.get(i, 0) for i in (1, 2, 3, 4))
    if min(n1, n2, n3, n4) == 0:
        return (FALLBACK_D,) * 3, True
    y = n1 / (n1 + 2.0 * n2)
    d1 = 1.0 - 2.0 * y * n2 / n1
    d2 = 2.0 - 3.0 * y * n3 / n2
    d3 = 3.0 - 4.0 * y * n4 / n3
    if not (0.0 < d1 <= 1.0 and 0.0 < d2 <= 2.0 and 0.0 < d3 <= 3.0):
        return (FALLBACK_D,) * 3, True
    return (d1, d2, d3), False


def _discount_for(count, d):
    return d[2] if count >= 3 else d[count - 1]


def _estimation_counts(counts, order):
    """Counts each order is estimated from: raw at the top, continuation
    below, raw for <s>-initial entries."""
    bos = counts.vocab.bos_id
    used = [None] * (order + 1)
    used[order] = dict(counts.grams[order - 1])
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for gram in counts.grams[k]:  # (k+1)-grams
            cont[gram[1:]] += 1
        level = {}
        for gram, raw in counts.grams[k - 1].items():
            if gram[0] == bos:
                level[gram] = raw
            else:
                c = cont.get(gram, 0)
                if c > 0:
                    level[gram] = c
        used[k] = level
    return used


def estimate_kn(counts, order=None):
    """Estimate a backoff NGramModel from a CountTable."""
    if order is None:
        order = counts.order
    if not 1 <= order <= counts.order:
        raise ConfigError(
            f"order must be in 1..{counts.order}, got {order}"
        )
    vocab = counts.vocab
    used = _estimation_counts(counts, order)

    discounts = []
    fallback = []
    for k in range(1, order + 1):
        d, flag = _order_discounts(used[k].values())
        discounts.append(d)
        fallback.append(flag)

    probs = [dict() for _ in range(order)]
    bows = [dict() for _ in range(order - 1)]

    # Unigrams: explicit entry for every predictable word, interpolated
    # with the uniform distribution.
    d1 = discounts[0]
    uni_total = sum(used[1].values())
    gamma1 = (
        sum(_discount_for(c, d1) for c in used[1].values()) / uni_total
    )
    n_pred = len(vocab.predicted_ids())
    for w in vocab.predicted_ids():
        c = used[1].get((w,), 0)
        mass = max(c - _discount_for(c, d1), 0.0) if c else 0.0
        probs[0][(w,)] = math.log(mass / uni_total + gamma1 / n_pred)
    probs[0][(vocab.bos_id,)] = BOS_LOG10 * math.log(10.0)

    partial = NGramModel(vocab, order, probs, bows, tuple(discounts),
                         tuple(fallback))

    for k in range(2, order + 1):
        d = discounts[k - 1]
        by_history = {}
        for gram, c in used[k].items():
            by_history.setdefault(gram[:-1], {})[gram[-1]] = c
        for h, grams in sorted(by_history.items()):
            total = sum(grams.values())
            gamma = sum(_discount_for(c, d) for c in grams.values()) / total
            for w, c in grams.items():
                lower = math.exp(partial._lp(h[1:], w))
                p = (c - _discount_for(c, d)) / total + gamma * lower
                probs[k - 1][h + (w,)] = math.log(p)
            bows[k - 2][h] = math.log(gamma)

    return partial
