"""Verification-protocol evaluation: ROC over pair distances, trapezoid
AUC, and k-fold accuracy with thresholds chosen on held-out folds.

A pair is accepted as "same" when its squared embedding distance is at or
below the threshold. Thresholds sweep every distinct observed distance plus
the midpoints between consecutive ones, which makes the ROC exact rather
than binned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegeneratePairs, Unattainable
from ..facecore.chips import FaceChip
from ..facecore.embedder import EmbedderParams, embed_chips


@dataclass(frozen=True)
class EvalReport:
    """ROC sweep plus cross-validated accuracy for one embedder."""

    roc: tuple  # ((threshold, fpr, tpr), ...) sorted by threshold
    auc: float
    best_threshold: float
    fold_accuracies: tuple
    mean_accuracy: float
    std_accuracy: float

    @property
    def roc_points(self) -> list[tuple[float, float]]:
        return [(0.0, 0.0)] + [(f, t) for _, f, t in self.roc]

    def to_dict(self) -> dict:
        return {
            "roc": [[thr, f, t] for thr, f, t in self.roc],
            "auc": self.auc,
            "best_threshold": self.best_threshold,
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
        }


def sweep_thresholds(distances: np.ndarray) -> np.ndarray:
    """Distinct observed distances plus midpoints between neighbours."""
    distinct = np.unique(distances)
    if len(distinct) == 1:
        return distinct
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.sort(np.concatenate([distinct, mids]))


def roc_sweep(distances: np.ndarray, is_same: np.ndarray):
    """ROC points at every swept threshold; returns ((thr, fpr, tpr), ...)."""
    same_d = np.sort(distances[is_same])
    diff_d = np.sort(distances[~is_same])
    if len(same_d) == 0 or len(diff_d) == 0:
        raise DegeneratePairs("both same and different pairs are required")
    thresholds = sweep_thresholds(distances)
    tpr = np.searchsorted(same_d, thresholds, side="right") / len(same_d)
    fpr = np.searchsorted(diff_d, thresholds, side="right") / len(diff_d)
    return tuple(zip(thresholds.tolist(), fpr.tolist(), tpr.tolist()))


def trapezoid_auc(roc: tuple) -> float:
    """Trapezoid area under the (fpr, tpr) curve, anchored at (0,0)."""
    fpr = np.array([0.0] + [f for _, f, _ in roc])
    tpr = np.array([0.0] + [t for _, _, t in roc])
    return float(np.trapezoid(tpr, fpr))


def _accuracy(distances: np.ndarray, is_same: np.ndarray, threshold: float) -> float:
    predicted_same = distances <= threshold
    return float(np.mean(predicted_same == is_same))


def best_accuracy_threshold(distances: np.ndarray, is_same: np.ndarray) -> float:
    """Accuracy-maximizing threshold; smallest wins ties (deterministic)."""
    thresholds = sweep_thresholds(distances)
    accs = [_accuracy(distances, is_same, t) for t in thresholds]
    return float(thresholds[int(np.argmax(accs))])


def pair_distances(pairs: list[tuple[FaceChip, FaceChip, bool]],
                   params: EmbedderParams) -> tuple[np.ndarray, np.ndarray]:
    """Squared embedding distances and same-flags for verification pairs."""
    left = embed_chips([a for a, _, _ in pairs], params)
    right = embed_chips([b for _, b, _ in pairs], params)
    distances = np.sum((left - right) ** 2, axis=1)
    is_same = np.array([s for _, _, s in pairs], dtype=bool)
    return distances, is_same


def evaluate_scores(distances: np.ndarray, is_same: np.ndarray,
                    n_folds: int = 10) -> EvalReport:
    """Build an EvalReport from raw distances (the chip-free core)."""
    if n_folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    distances = np.asarray(distances, dtype=np.float64)
    is_same = np.asarray(is_same, dtype=bool)
    if is_same.all() or (~is_same).all():
        raise DegeneratePairs("both same and different pairs are required")

    roc = roc_sweep(distances, is_same)
    auc = trapezoid_auc(roc)
    best_thr = best_accuracy_threshold(distances, is_same)

    fold_ids = np.array_split(np.arange(len(distances)), n_folds)
    fold_accs = []
    for i, held in enumerate(fold_ids):
        if len(held) == 0:
            continue
        train_mask = np.ones(len(distances), dtype=bool)
        train_mask[held] = False
        thr = best_accuracy_threshold(distances[train_mask], is_same[train_mask])
        fold_accs.append(_accuracy(distances[held], is_same[held], thr))

    fold_accs = tuple(fold_accs)
    return EvalReport(roc=roc, auc=auc, best_threshold=best_thr,
                      fold_accuracies=fold_accs,
                      mean_accuracy=float(np.mean(fold_accs)),
                      std_accuracy=float(np.std(fold_accs)))


def evaluate_pairs(pairs: list[tuple[FaceChip, FaceChip, bool]],
                   params: EmbedderParams, n_folds: int = 10) -> EvalReport:
    """Distance-threshold verification with k-fold cross-validated accuracy."""
    if len(pairs) < 10 * n_folds:
        raise ValueError(f"need >= 10 pairs per fold ({10 * n_folds} total), got {len(pairs)}")
    distances, is_same = pair_distances(pairs, params)
    return evaluate_scores(distances, is_same, n_folds=n_folds)


def calibrate_threshold(report: EvalReport, target_far: float) -> float:
    """Largest swept threshold whose FPR stays within the target."""
    if not 0.0 < target_far <= 1.0:
        raise ValueError("target_far must be in (0, 1]")
    best = None
    for thr, fpr, _ in report.roc:
        if fpr <= target_far:
            best = thr
    if best is None:
        raise Unattainable(
            f"smallest swept threshold already exceeds FAR {target_far}")
    return float(best)
