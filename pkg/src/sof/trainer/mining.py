"""Triplet enumeration and semi-hard filtering.

"all" enumerates every (anchor, positive, negative) with matching anchor /
positive labels and a different negative label. "semi-hard" keeps only
triplets whose negative is farther than the positive but still inside the
margin band, judged under the current embedder.
"""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientIdentities
from ..facecore.embedder import EmbedderParams, embed_chips
from .config import TrainConfig
from .dataset import LabeledChipSet, Triplet


def enumerate_triplets(labels: list[str]) -> list[Triplet]:
    """All ordered (a, p) same-label pairs crossed with every negative."""
    n = len(labels)
    by_label: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    triplets = []
    for lab, idx in sorted(by_label.items()):
        negatives = [k for k in range(n) if labels[k] != lab]
        if len(idx) < 2 or not negatives:
            continue
        for a in idx:
            for p in idx:
                if p == a:
                    continue
                for neg in negatives:
                    triplets.append(Triplet(a, p, neg))
    return triplets


def filter_semi_hard(triplets: list[Triplet], embeddings: np.ndarray,
                     margin: float) -> list[Triplet]:
    """Keep triplets with d_ap < d_an < d_ap + margin."""
    if not triplets:
        return []
    anchors = np.array([t.anchor for t in triplets])
    positives = np.array([t.positive for t in triplets])
    negatives = np.array([t.negative for t in triplets])
    a = embeddings[anchors]
    d_ap = np.sum((a - embeddings[positives]) ** 2, axis=1)
    d_an = np.sum((a - embeddings[negatives]) ** 2, axis=1)
    keep = (d_an > d_ap) & (d_an < d_ap + margin)
    return [t for t, k in zip(triplets, keep) if k]


def mine_triplets(chip_set: LabeledChipSet, params: EmbedderParams,
                  cfg: TrainConfig) -> list[Triplet]:
    """Mine triplets over the whole set treated as one batch.

    Enumeration order is deterministic (sorted labels, index order), so the
    result depends only on (set, params, cfg).
    """
    labels = chip_set.labels()
    if len(set(labels)) < 2 or not chip_set.mineable_identities():
        raise InsufficientIdentities(
            "triplet mining needs >= 2 identities with >= 2 chips for at least one")
    triplets = enumerate_triplets(labels)
    if cfg.mining_mode == "all":
        return triplets
    embeddings = embed_chips(list(r.chip for r in chip_set), params)
    return filter_semi_hard(triplets, embeddings, cfg.margin)
