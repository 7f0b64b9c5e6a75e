"""Linear interpolation of n-gram models: EM weight fitting, dynamic
mixture scoring, and static merge into a single backoff model."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from .model import NGramModel

EM_TOL = 1e-7
EM_MAX_ITERS = 200


@dataclass
class InterpolationWeights:
    lam: np.ndarray
    loglik_history: tuple = ()

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if np.any(self.lam < 0) or abs(self.lam.sum() - 1.0) > 1e-9:
            raise ConfigError(
                "interpolation weights must be >= 0 and sum to 1"
            )


def _check_components(components):
    if len(components) < 2:
        raise ConfigError("need at least 2 component models")
    for m in components[1:]:
        if m.vocab != components[0].vocab:
            raise ConfigError("components must share a vocabulary")


def interpolate_em(components, heldout, oov_policy="score-unk",
                   tol=EM_TOL, max_iters=EM_MAX_ITERS):
    """EM-fit mixture weights to maximize held-out likelihood.

    Stops when the total log-likelihood improves by less than tol or
    after max_iters iterations; the log-likelihood is non-decreasing at
    every step by construction (asserted).
    """
    _check_components(components)
    cols = []
    for m in components:
        logprobs, _ = m.token_logprobs(heldout, oov_policy=oov_policy)
        cols.append(np.exp(logprobs))
    probs = np.stack(cols, axis=1)  # (tokens, models)
    if probs.shape[0] == 0:
        raise DataError("empty held-out text")
    if np.any(probs.max(axis=1) == 0.0):
        raise DataError(
            "a held-out event has zero probability in every component"
        )
    lam = np.full(len(components), 1.0 / len(components))
    history = []
    prev = -np.inf
    for _ in range(max_iters):
        mix = probs @ lam
        loglik = float(np.log(mix).sum())
        assert loglik >= prev - 1e-9, "EM log-likelihood decreased"
        history.append(loglik)
        if loglik - prev < tol:
            break
        prev = loglik
        resp = probs * lam / mix[:, None]
        lam = resp.mean(axis=0)
    lam /= lam.sum()
    return InterpolationWeights(lam, tuple(history))


class MixtureLm:
    """Dynamic mixture: p(w|h) = sum_i lambda_i p_i(w|h). Used directly
    for rescoring; merge_interpolated bakes the same mixture into one
    backoff model."""

    def __init__(self, components, weights):
        _check_components(components)
        lam = weights.lam if isinstance(weights, InterpolationWeights) \
            else np.asarray(weights, dtype=np.float64)
        if lam.shape != (len(components),):
            raise ConfigError("one weight per component required")
        InterpolationWeights(lam)  # validate simplex
        self.components = list(components)
        self.lam = lam
        self.vocab = components[0].vocab
        self.order = max(m.order for m in components)

    def logprob_ids(self, history, word):
        p = sum(
            w * math.exp(m.logprob_ids(history, word))
            for w, m in zip(self.lam, self.components)
        )
        return math.log(p) if p > 0 else -math.inf

    def token_logprobs(self, sentences, oov_policy="score-unk"):
        cols = []
        oov = 0
        for m in self.components:
            logprobs, oov = m.token_logprobs(sentences, oov_policy)
            cols.append(np.exp(logprobs))
        mix = np.stack(cols, axis=1) @ self.lam
        with np.errstate(divide="ignore"):
            return np.log(mix), oov


def merge_interpolated(components, weights):
    """Bake a weighted mixture into a single backoff model.

    The merged model stores, at the union of the components' explicit
    n-grams, exactly sum_i lambda_i p_i(w|h) (each p_i fully backed
    off); backoff weights are re-solved bottom-up so every history
    normalizes.
    """
    mixture = MixtureLm(components, weights)
    vocab = mixture.vocab
    order = mixture.order
    probs = [dict() for _ in range(order)]
    bows = [dict() for _ in range(order - 1)]
    merged = NGramModel(vocab, order, probs, bows)

    for k in range(1, order + 1):
        grams = set()
        for m in components:
            if m.order >= k:
                grams |= set(m.probs[k - 1])
        if k == 1:
            grams |= {(w,) for w in vocab.predicted_ids()}
            grams.add((vocab.bos_id,))
        for g in sorted(grams):
            if k == 1 and g[0] == vocab.bos_id:
                probs[0][g] = min(
                    m.probs[0].get(g, -np.inf) for m in components
                )
                continue
            probs[k - 1][g] = mixture.logprob_ids(g[:-1], g[-1])
        if k == 1:
            continue
        # Re-solve backoff weights for the histories at this level.
        by_history = {}
        for g, lp in probs[k - 1].items():
            by_history.setdefault(g[:-1], []).append((g[-1], lp))
        for h, entries in sorted(by_history.items()):
            num = 1.0
            den = 1.0
            for w, lp in entries:
                num -= math.exp(lp)
                den -= math.exp(merged._lp(h[1:], w))
            if den <= 1e-12 or num <= 0.0:
                bows[k - 2][h] = 0.0
            else:
                bows[k - 2][h] = math.log(num / den)
    return merged
