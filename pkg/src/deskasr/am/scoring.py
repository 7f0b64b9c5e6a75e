"""State priors, hybrid acoustic scores, and WER computation."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError, ShapeError


def estimate_priors(alignments, num_states, alpha=0.5):
    """Smoothed state frequencies: p_s = (count_s + a) / (total + a*K).

    alignments: iterable of (utt_id, state-id array).
    """
    if alpha < 0:
        raise ConfigError(f"smoothing count must be >= 0, got {alpha}")
    counts = np.zeros(num_states)
    total = 0
    for _, ids in alignments:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= num_states):
            raise DataError("alignment contains state ids outside the inventory")
        counts += np.bincount(ids, minlength=num_states)
        total += ids.size
    if total == 0:
        raise DataError("no frames in alignments; cannot estimate priors")
    p = (counts + alpha) / (total + alpha * num_states)
    if np.any(p <= 0):
        raise DataError(
            "zero prior for an unseen state; use a positive smoothing count"
        )
    return p


def acoustic_scores(log_posteriors, priors, kappa=1.0):
    """Hybrid emission scores: kappa * (log posterior - log prior)."""
    log_post = np.asarray(log_posteriors, dtype=np.float64)
    p = np.asarray(priors, dtype=np.float64)
    if kappa <= 0:
        raise ConfigError(f"acoustic scale must be > 0, got {kappa}")
    if log_post.ndim != 2 or log_post.shape[1] != p.shape[0]:
        raise ShapeError(
            f"posteriors over {log_post.shape[-1]} states vs priors over "
            f"{p.shape[0]}"
        )
    if np.any(p <= 0):
        raise DataError("priors must be strictly positive")
    return kappa * (log_post - np.log(p)[None, :])


@dataclass(frozen=True)
class WerReport:
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self):
        if self.ref_words == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return self.errors / self.ref_words

    def __add__(self, other):
        return WerReport(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_words + other.ref_words,
        )


def wer(reference, hypothesis):
    """Minimum-edit-distance word error counts.

    Unit costs; on equal cost the backtrace prefers substitution over
    insertion over deletion.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)  # deletions
    dist[0, :] = np.arange(m + 1)  # insertions
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            ins = dist[i, j - 1] + 1
            dele = dist[i - 1, j] + 1
            dist[i, j] = min(sub, ins, dele)
    s = d = ins_count = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (
            ref[i - 1] != hyp[j - 1]
        ):
            s += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif j > 0 and dist[i, j] == dist[i, j - 1] + 1:
            ins_count += 1
            j -= 1
        else:
            d += 1
            i -= 1
    return WerReport(int(s), int(d), int(ins_count), n)
