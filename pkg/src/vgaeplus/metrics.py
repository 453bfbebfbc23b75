"""Ranking and classification scores: ROC-AUC, hit rate at 20%, macro F1."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError

__all__ = ["roc_auc", "hit_rate_at_20", "f1_macro"]


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties counting half.

    Computed from midranks (Mann-Whitney U), so it equals the pairwise
    count exactly.  Raises :class:`ValidationError` when only one class is
    present.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise ValidationError(f"roc_auc: {s.size} scores but {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_auc: need at least one positive and one negative")
    ranks = rankdata(s, method="average")
    # twice the U statistic is an integer, so the division is the only rounding step
    u2 = 2.0 * ranks[y].sum() - n_pos * (n_pos + 1)
    return float(u2 / (2.0 * n_pos * n_neg))


def hit_rate_at_20(scores, labels) -> float:
    """Percentage of positives among the top ``ceil(0.2 n)`` scores (stable descending order)."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.size == 0:
        raise ValidationError("hit_rate_at_20: empty input")
    top = math.ceil(0.2 * s.size)
    order = np.argsort(-s, kind="stable")[:top]
    return 100.0 * y[order].sum() / top


def f1_macro(predicted, true, n_classes: int) -> float:
    """Unweighted mean of per-class F1 over all ``n_classes``; undefined classes score 0."""
    p = np.asarray(predicted, dtype=np.intp).reshape(-1)
    t = np.asarray(true, dtype=np.intp).reshape(-1)
    if p.size == 0 or p.shape != t.shape:
        raise ValidationError("f1_macro: need equal-length, non-empty inputs")
    if min(p.min(), t.min()) < 0 or max(p.max(), t.max()) >= n_classes:
        raise ValidationError("f1_macro: class index out of range")
    f1 = np.zeros(n_classes)
    for c in range(n_classes):
        tp = np.sum((p == c) & (t == c))
        denom = np.sum(p == c) + np.sum(t == c)
        f1[c] = 2.0 * tp / denom if denom else 0.0
    return float(f1.mean())
