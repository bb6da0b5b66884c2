"""Classification and segmentation losses with their output gradients."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ClampWarning

PROB_FLOOR = 1e-12


@dataclass
class LossValue:
    value: float
    grad: np.ndarray


def nll_loss(probs: np.ndarray, labels: np.ndarray, reduction: str = "sum") -> LossValue:
    """Negative log-likelihood of the true class, summed over the batch.

    ``reduction="mean"`` divides value and gradient by the batch size.
    Probabilities below 1e-12 are clamped before the log (with a warning).
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.intp)
    rows = np.arange(len(labels))
    p_true = probs[rows, labels]
    if np.any(p_true < PROB_FLOOR):
        warnings.warn(f"{int(np.sum(p_true < PROB_FLOOR))} probabilities clamped to {PROB_FLOOR}", ClampWarning)
    p_true = np.maximum(p_true, PROB_FLOOR)
    value = float(-np.log(p_true.astype(np.float64)).sum())
    grad = np.zeros_like(probs)
    grad[rows, labels] = -1.0 / p_true
    if reduction == "mean":
        value /= len(labels)
        grad /= len(labels)
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return LossValue(value, grad)


def jaccard_loss(pred: np.ndarray, true: np.ndarray, eps: float = 1e-6) -> LossValue:
    """Soft Jaccard dissimilarity ``1 - (I + eps) / (U + eps)`` over all pixels in the batch.

    ``I = sum(t * p)`` and ``U = sum(t) + sum(p) - I``.
    """
    p = np.asarray(pred)
    t = np.asarray(true, dtype=p.dtype)
    inter = float(np.sum(t * p, dtype=np.float64))
    union = float(np.sum(t, dtype=np.float64) + np.sum(p, dtype=np.float64)) - inter
    num = inter + eps
    den = union + eps
    value = 1.0 - num / den
    # dJ/dp = (t * den - num * (1 - t)) / den^2
    grad = -((t * den - num * (1.0 - t)) / (den * den)).astype(p.dtype)
    return LossValue(value, grad)
