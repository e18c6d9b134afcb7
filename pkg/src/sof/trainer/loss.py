"""Triplet hinge loss on unit-sphere embeddings.

loss(a, p, n) = max(0, |a - p|^2 - |a - n|^2 + margin); pulls the positive
inside the negative by at least the margin.
"""

from __future__ import annotations

import numpy as np


def squared_distance(u: np.ndarray, v: np.ndarray) -> float:
    diff = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return float(diff @ diff)


def triplet_loss(anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray,
                 margin: float) -> float:
    if margin <= 0:
        raise ValueError("margin must be > 0")
    d_ap = squared_distance(anchor, positive)
    d_an = squared_distance(anchor, negative)
    return max(0.0, d_ap - d_an + margin)


def batch_triplet_losses(embeddings: np.ndarray, anchors: np.ndarray,
                         positives: np.ndarray, negatives: np.ndarray,
                         margin: float) -> np.ndarray:
    """Hinge values for index triplets into an embedding matrix (B, D)."""
    a = embeddings[anchors]
    d_ap = np.sum((a - embeddings[positives]) ** 2, axis=1)
    d_an = np.sum((a - embeddings[negatives]) ** 2, axis=1)
    return np.maximum(0.0, d_ap - d_an + margin)
