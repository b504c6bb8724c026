"""NT-Xent contrastive loss with analytic gradient.

Rows are ordered as interleaved view pairs: row 2i and row 2i+1 are the two
augmented views of item i.  Similarity is the dot product of unit rows; the
negative set for each anchor is all 2N-1 other rows.
"""
from __future__ import annotations

import numpy as np

NORM_TOLERANCE = 1e-4


def ntxent_loss(projections: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
    """Mean NT-Xent over all 2N anchors; returns (loss, d loss / d projections)."""
    z = np.asarray(projections, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] % 2 != 0 or z.shape[0] == 0:
        raise ValueError("projections must be (2N, D) with N >= 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    norms = np.linalg.norm(z, axis=1)
    if np.abs(norms - 1.0).max() > NORM_TOLERANCE:
        raise ValueError("projection rows must be unit-norm")

    m = z.shape[0]
    pos = np.arange(m) ^ 1  # partner of each interleaved row
    sim = (z @ z.T) / tau
    np.fill_diagonal(sim, -np.inf)  # exclude self from the denominator

    row_max = sim.max(axis=1, keepdims=True)
    e = np.exp(sim - row_max)
    denom = e.sum(axis=1, keepdims=True)
    log_prob = sim - (row_max + np.log(denom))
    loss = -log_prob[np.arange(m), pos].mean()

    # softmax minus the one-hot positive, averaged over anchors
    g = e / denom
    g[np.arange(m), pos] -= 1.0
    g /= m
    grad = (g + g.T) @ z / tau
    return float(loss), grad
