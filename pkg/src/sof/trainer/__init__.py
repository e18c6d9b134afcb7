"""Triplet-loss training, mining, incremental fine-tuning, evaluation."""

from .config import TrainConfig
from .dataset import LabeledChip, LabeledChipSet, Triplet
from .evaluation import (
    EvalReport,
    calibrate_threshold,
    evaluate_pairs,
    evaluate_scores,
    pair_distances,
    trapezoid_auc,
)
from .loss import squared_distance, triplet_loss
from .mining import mine_triplets
from .training import (
    batch_loss_and_grads,
    incremental_update,
    rebuild_gallery,
    train,
    train_epoch,
)

__all__ = [
    "EvalReport",
    "LabeledChip",
    "LabeledChipSet",
    "TrainConfig",
    "Triplet",
    "batch_loss_and_grads",
    "calibrate_threshold",
    "evaluate_pairs",
    "evaluate_scores",
    "incremental_update",
    "mine_triplets",
    "pair_distances",
    "rebuild_gallery",
    "squared_distance",
    "train",
    "train_epoch",
    "trapezoid_auc",
    "triplet_loss",
]
