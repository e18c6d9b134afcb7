"""Mini-batch SGD on mean triplet loss, plus incremental fine-tuning.

Gradients are exact: the hinge subgradient is propagated through the
L2-normalization Jacobian (I - y y^T)/|z|, the second dense layer, tanh,
and the first dense layer. The pooling stage has no parameters.
"""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientIdentities, NonFiniteGradient
from ..facecore.embedder import EmbedderParams, forward_batch, pool_batch
from ..facecore.gallery import GalleryEntry, IdentityGallery
from .config import TrainConfig
from .dataset import LabeledChipSet, Triplet
from .mining import enumerate_triplets, filter_semi_hard

# Chips grouped per identity within a batch; 4 gives every group internal
# positives while keeping batches identity-diverse.
GROUP_SIZE = 4


def batch_loss_and_grads(xs: np.ndarray, triplets: list[Triplet],
                         params: EmbedderParams, margin: float):
    """Mean triplet loss over the given triplets and its parameter gradients.

    xs is the pooled input matrix (B, P); triplet indices refer to its rows.
    Returns (mean_loss, grads) with grads keyed w1/b1/w2/b2.
    """
    y, (xs, h, z2, norms) = forward_batch(xs, params)

    anchors = np.array([t.anchor for t in triplets])
    positives = np.array([t.positive for t in triplets])
    negatives = np.array([t.negative for t in triplets])
    a = y[anchors]
    d_ap = np.sum((a - y[positives]) ** 2, axis=1)
    d_an = np.sum((a - y[negatives]) ** 2, axis=1)
    hinge = d_ap - d_an + margin
    active = hinge > 0
    mean_loss = float(np.sum(np.maximum(0.0, hinge)) / len(triplets))

    # d(mean loss)/d(embedding rows); each active triplet contributes
    # 2(n-p) to its anchor, 2(p-a) to its positive, 2(a-n) to its negative.
    dy = np.zeros_like(y)
    if np.any(active):
        w = 2.0 / len(triplets)
        ai, pi, ni = anchors[active], positives[active], negatives[active]
        np.add.at(dy, ai, w * (y[ni] - y[pi]))
        np.add.at(dy, pi, w * (y[pi] - y[ai]))
        np.add.at(dy, ni, w * (y[ai] - y[ni]))

    # Through y = z2/|z2|: dz2 = (dy - y (y . dy)) / |z2|.
    dz2 = (dy - y * np.sum(y * dy, axis=1, keepdims=True)) / norms
    dw2 = dz2.T @ h
    db2 = dz2.sum(axis=0)
    dh = dz2 @ params.w2
    dz1 = dh * (1.0 - h * h)
    dw1 = dz1.T @ xs
    db1 = dz1.sum(axis=0)

    grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}
    if not np.isfinite(mean_loss):
        raise NonFiniteGradient("non-finite loss")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    return mean_loss, grads


def _apply_sgd(params: EmbedderParams, grads: dict, lr: float,
               freeze_first_layer: bool) -> EmbedderParams:
    if lr == 0.0:
        return params
    if freeze_first_layer:
        w1, b1 = params.w1, params.b1
    else:
        w1 = params.w1 - lr * grads["w1"]
        b1 = params.b1 - lr * grads["b1"]
    return params.replace_weights(w1, b1,
                                  params.w2 - lr * grads["w2"],
                                  params.b2 - lr * grads["b2"])


def make_batches(chip_set: LabeledChipSet, cfg: TrainConfig, epoch: int) -> list[list[int]]:
    """Identity-grouped batches: chips are dealt into per-identity groups of
    up to GROUP_SIZE, groups shuffled, then packed into batches.

    Deterministic given (cfg.rng_seed, epoch).
    """
    rng = np.random.default_rng([cfg.rng_seed, epoch])
    by_person = chip_set.by_person()
    groups: list[list[int]] = []
    for pid in sorted(by_person):
        idx = np.array(by_person[pid])
        rng.shuffle(idx)
        for start in range(0, len(idx), GROUP_SIZE):
            groups.append(list(idx[start:start + GROUP_SIZE]))
    order = rng.permutation(len(groups))
    batches: list[list[int]] = []
    current: list[int] = []
    for gi in order:
        group = groups[gi]
        if current and len(current) + len(group) > cfg.batch_size:
            batches.append(current)
            current = []
        current.extend(group)
    if current:
        batches.append(current)
    return batches


def _check_mineable(chip_set: LabeledChipSet) -> None:
    if len(set(chip_set.labels())) < 2 or not chip_set.mineable_identities():
        raise InsufficientIdentities(
            "training needs >= 2 identities and >= 2 chips for at least one identity")


def train_epoch(chip_set: LabeledChipSet, params: EmbedderParams, cfg: TrainConfig,
                epoch: int = 0) -> tuple[EmbedderParams, float]:
    """One pass of mini-batch SGD; returns (new params, epoch mean loss).

    The mean loss weights every mined triplet equally across batches, so a
    zero-learning-rate pass reports the current loss. Batches whose mining
    comes up empty contribute no update.
    """
    _check_mineable(chip_set)
    chips = [r.chip for r in chip_set]
    labels = chip_set.labels()

    total_loss = 0.0
    total_triplets = 0
    for batch in make_batches(chip_set, cfg, epoch):
        batch_labels = [labels[i] for i in batch]
        triplets = enumerate_triplets(batch_labels)
        if not triplets:
            continue
        xs = pool_batch([chips[i] for i in batch], params)
        if cfg.mining_mode == "semi-hard":
            y, _ = forward_batch(xs, params)
            triplets = filter_semi_hard(triplets, y, cfg.margin)
            if not triplets:
                continue
        loss, grads = batch_loss_and_grads(xs, triplets, params, cfg.margin)
        total_loss += loss * len(triplets)
        total_triplets += len(triplets)
        params = _apply_sgd(params, grads, cfg.learning_rate, cfg.freeze_first_layer)

    mean_loss = total_loss / total_triplets if total_triplets else 0.0
    return params, mean_loss


def train(chip_set: LabeledChipSet, params: EmbedderParams, cfg: TrainConfig):
    """Run cfg.epochs epochs; returns (params, per-epoch mean losses)."""
    losses = []
    for epoch in range(cfg.epochs):
        params, loss = train_epoch(chip_set, params, cfg, epoch=epoch)
        losses.append(loss)
    return params, losses


def rebuild_gallery(chip_set: LabeledChipSet, params: EmbedderParams,
                    old_gallery: IdentityGallery,
                    new_person_levels: dict[str, int] | None = None,
                    new_person_names: dict[str, str] | None = None) -> IdentityGallery:
    """Recompute centroids for every identity present in chip_set.

    Metadata for known identities comes from the old gallery; new ones take
    the supplied level/name (guest level 1 by default) and the provenance of
    their records. Old identities with no chips available keep their stale
    entries rather than being dropped.
    """
    new_person_levels = new_person_levels or {}
    new_person_names = new_person_names or {}
    entries = dict(old_gallery.entries)
    by_person = chip_set.by_person()
    for pid in sorted(by_person):
        idx = by_person[pid]
        embs = np.stack([_embed_one(chip_set.records[i].chip, params) for i in idx])
        mean = embs.mean(axis=0)
        old = old_gallery.entries.get(pid)
        if old is not None:
            entries[pid] = GalleryEntry(mean, len(idx), old.permission_level,
                                        old.display_name, old.provenance)
        else:
            entries[pid] = GalleryEntry(
                mean, len(idx),
                new_person_levels.get(pid, 1),
                new_person_names.get(pid, pid),
                chip_set.records[idx[0]].source)
    return IdentityGallery(entries)


def _embed_one(chip, params: EmbedderParams) -> np.ndarray:
    xs = pool_batch([chip], params)
    y, _ = forward_batch(xs, params)
    return y[0]


def incremental_update(old_params: EmbedderParams, old_gallery: IdentityGallery,
                       new_data: LabeledChipSet, cfg: TrainConfig | None = None,
                       enrollment_store: LabeledChipSet | None = None,
                       new_person_levels: dict[str, int] | None = None,
                       new_person_names: dict[str, str] | None = None,
                       loss_log: list | None = None,
                       ) -> tuple[EmbedderParams, IdentityGallery]:
    """Fine-tune from the current weights, then rebuild all centroids.

    The training set is the stored enrollment chips plus the new data. When
    that set cannot be mined (fewer than two identities, or no identity with
    two chips), the gradient phase is skipped and the update is
    enrollment-only; labels must always take effect even before the corpus
    supports training. Per-epoch losses are appended to loss_log when given
    (the audit manifests record them).
    """
    if len(new_data) == 0:
        raise InsufficientIdentities("incremental update requires nonempty new data")
    if cfg is None:
        cfg = TrainConfig(freeze_first_layer=True, epochs=10)

    train_set = enrollment_store.merged(new_data) if enrollment_store else new_data
    params = old_params
    if cfg.epochs > 0:
        try:
            _check_mineable(train_set)
        except InsufficientIdentities:
            pass  # enrollment-only update
        else:
            params, losses = train(train_set, params, cfg)
            if loss_log is not None:
                loss_log.extend(losses)

    gallery = rebuild_gallery(train_set, params, old_gallery,
                              new_person_levels, new_person_names)
    return params, gallery
