# Licensed under the MIT License

"""Segmentation metrics: mean Jaccard index (M_J) and mean F-score (M_F)."""

import numpy as np

from .errors import shape_mismatch

BETA2 = 0.3


def _frames(pred: np.ndarray, gt: np.ndarray):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise shape_mismatch("masks", pred.shape, gt.shape)
    if pred.ndim == 2:
        pred, gt = pred[np.newaxis], gt[np.newaxis]
    t = pred.shape[0]
    return pred.reshape(t, -1) > 0.5, gt.reshape(t, -1) > 0.5


def jaccard_per_frame(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Intersection over union per frame; frames with an empty union score 1."""
    p, g = _frames(pred, gt)
    inter = np.sum(p & g, axis=1)
    union = np.sum(p | g, axis=1)
    return np.where(union > 0, inter / np.maximum(union, 1), 1.0)


def fscore_per_frame(pred: np.ndarray, gt: np.ndarray, beta2: float = BETA2) -> np.ndarray:
    """F-score per frame, ``(1 + b2) P R / (b2 P + R)``; 0 when ``P + R = 0``."""
    p, g = _frames(pred, gt)
    tp = np.sum(p & g, axis=1).astype(np.float64)
    n_pred = np.sum(p, axis=1)
    n_gt = np.sum(g, axis=1)
    precision = np.where(n_pred > 0, tp / np.maximum(n_pred, 1), 0.0)
    recall = np.where(n_gt > 0, tp / np.maximum(n_gt, 1), 0.0)
    denom = beta2 * precision + recall
    score = (1.0 + beta2) * precision * recall / np.where(denom > 0, denom, 1.0)
    return np.where(precision + recall > 0, score, 0.0)


def metric_jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean Jaccard index over frames of binary masks ``[T, H, W]``."""
    return float(np.mean(jaccard_per_frame(pred, gt)))


def metric_fscore(pred: np.ndarray, gt: np.ndarray, beta2: float = BETA2) -> float:
    """Mean F-score over frames with ``beta^2 = 0.3``."""
    return float(np.mean(fscore_per_frame(pred, gt, beta2)))
