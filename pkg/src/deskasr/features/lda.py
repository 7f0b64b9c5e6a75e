"""Linear discriminant analysis over labeled (usually spliced) frames."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import ConfigError, ShapeError

WITHIN_REG = 1e-6


@dataclass
class LdaTransform:
    """Projection rows are generalized eigenvectors, top eigenvalue first."""

    matrix: np.ndarray
    num_classes: int
    eigenvalues: np.ndarray

    def project(self, frames):
        x = np.asarray(frames, dtype=np.float64)
        return x @ self.matrix.T

    @property
    def target_dim(self):
        return self.matrix.shape[0]

    @property
    def source_dim(self):
        return self.matrix.shape[1]


def scatter_matrices(frames, labels):
    """Between-class and within-class scatter of labeled frames."""
    x = np.asarray(frames, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ConfigError("LDA needs at least 2 distinct classes")
    dim = x.shape[1]
    overall = x.mean(axis=0)
    sb = np.zeros((dim, dim))
    sw = np.zeros((dim, dim))
    for c in classes:
        xc = x[y == c]
        mu = xc.mean(axis=0)
        diff = (mu - overall)[:, None]
        sb += xc.shape[0] * (diff @ diff.T)
        centered = xc - mu
        sw += centered.T @ centered
    return sb / x.shape[0], sw / x.shape[0]


def estimate_lda(frames, labels, target_dim=40):
    """Top generalized eigenvectors of (between, within) class scatter.

    The within-class scatter is ridge-regularized to full rank, which
    also permits target dims beyond classes-1. Rows come back in
    descending eigenvalue order with their largest-magnitude entry made
    positive.
    """
    x = np.asarray(frames, dtype=np.float64)
    if target_dim < 1:
        raise ConfigError(f"target_dim must be >= 1, got {target_dim}")
    if target_dim > x.shape[1]:
        raise ShapeError(
            f"target_dim {target_dim} exceeds source dim {x.shape[1]}"
        )
    sb, sw = scatter_matrices(x, labels)
    sw = sw + np.eye(x.shape[1]) * (WITHIN_REG * np.trace(sw) / x.shape[1])
    eigvals, eigvecs = scipy.linalg.eigh(sb, sw)
    order = np.argsort(eigvals)[::-1][:target_dim]
    rows = eigvecs[:, order].T.copy()
    for r in rows:
        peak = np.argmax(np.abs(r))
        if r[peak] < 0:
            r *= -1.0
    classes = np.unique(np.asarray(labels)).size
    return LdaTransform(rows, classes, eigvals[order].copy())
