"""Evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..models.kg import metrics_from_ranks


def roc_auc(pos_scores, neg_scores):
    """P(pos > neg) + P(tie) / 2 via the Mann-Whitney rank statistic."""
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("roc_auc needs at least one positive and one negative score")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def f1_macro(pred, true, n_classes=None):
    """Unweighted mean of per-class F1; classes absent from both vectors are skipped."""
    pred = np.asarray(pred, dtype=np.int64).ravel()
    true = np.asarray(true, dtype=np.int64).ravel()
    if len(pred) == 0 or len(pred) != len(true):
        raise ValueError("f1_macro needs equal-length, non-empty label vectors")
    classes = np.arange(n_classes) if n_classes else np.union1d(pred, true)
    scores = []
    for c in classes:
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        if tp + fp + fn == 0:
            continue
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def accuracy(pred, true):
    return float(np.mean(np.asarray(pred) == np.asarray(true)))


def harmonic_baseline_mrr(n_candidates):
    """Expected MRR of a uniformly random ranking over ``n_candidates``."""
    return float(np.sum(1.0 / np.arange(1, n_candidates + 1)) / n_candidates)


__all__ = ["roc_auc", "f1_macro", "accuracy", "harmonic_baseline_mrr", "metrics_from_ranks"]
