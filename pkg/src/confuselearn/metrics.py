"""Evaluation metrics: accuracy and AUROC ranking of confusing probabilities."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def accuracy(predicted, labels):
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError("shape mismatch between predictions and labels")
    return float(np.mean(predicted == labels))


def auroc(scores, is_positive):
    """Probability a positive outranks a negative, ties counted as 0.5.

    Computed via the rank-sum identity; equals the brute-force count of
    correctly ordered pairs divided by n_pos * n_neg.
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_positive = np.asarray(is_positive, dtype=bool)
    if scores.shape != is_positive.shape:
        raise ValueError("scores and labels must have the same shape")
    n_pos = int(is_positive.sum())
    n_neg = is_positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float(
        (ranks[is_positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


def per_class_accuracy(predicted, labels, class_count):
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    out = {}
    for j in range(class_count):
        mask = labels == j
        out[j] = float(np.mean(predicted[mask] == j)) if mask.any() else None
    return out
