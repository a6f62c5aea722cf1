"""Evaluation metrics."""

from __future__ import annotations

import math

import numpy as np

EPS = 1e-8


def normalized_l1(predictions, truths, per_sample: bool = False) -> float:
    """L1 distance between prediction and truth vectors over the L1 norm of the truths.

    ``per_sample=True`` instead averages ``|p - y| / max(|y|, eps)`` row by row.
    """
    p = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(truths, dtype=np.float64).ravel()
    if p.shape != y.shape or p.size == 0:
        raise ValueError(f"need equal non-empty lengths, got {p.size} and {y.size}")
    if per_sample:
        return float(np.mean(np.abs(p - y) / np.maximum(np.abs(y), EPS)))
    return float(np.abs(p - y).sum() / max(np.abs(y).sum(), EPS))


def precision_rate(recovered_leaves, true_leaves) -> float:
    """Fraction of samples whose leaf matches the truth in every tree."""
    r = np.atleast_2d(np.asarray(recovered_leaves))
    t = np.atleast_2d(np.asarray(true_leaves))
    if r.shape != t.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {t.shape}")
    return float(np.all(r == t, axis=1).mean())


def indicator_cross_entropy(recovered, true_leaves, tree_offsets) -> float:
    """Mean over trees of -log2 of the renormalized mass on the true leaf.

    ``recovered`` is one probabilistic indicator vector (or a batch of them,
    in which case the per-sample values are averaged).
    """
    R = np.atleast_2d(np.asarray(recovered, dtype=np.float64))
    L = np.atleast_2d(np.asarray(true_leaves))
    offsets = np.asarray(tree_offsets)
    T = len(offsets) - 1
    if L.shape != (R.shape[0], T):
        raise ValueError(f"true leaves shape {L.shape} does not fit {R.shape[0]} x {T}")
    rows = np.arange(R.shape[0])
    total = np.zeros(R.shape[0])
    for t in range(T):
        seg = R[:, offsets[t]:offsets[t + 1]]
        mass = seg.sum(axis=1)
        p = np.where(mass > 0, seg[rows, L[:, t]] / np.where(mass > 0, mass, 1.0), 0.0)
        total += -np.log2(np.maximum(p, 1e-12))
    return float((total / T).mean()) + 0.0


def pooled_detection_rate(flags, truths) -> float:
    """Detection rate with flags and ground truth pooled over all samples and trees."""
    hit = truth = flagged = 0
    for f_row, g_row in zip(flags, truths):
        for f, g in zip(f_row, g_row):
            hit += len(set(f) & set(g))
            truth += len(g)
            flagged += len(f)
    if truth == 0:
        return 1.0 if flagged == 0 else 0.0
    return hit / truth


def mean_std(values) -> tuple[float, float]:
    values = list(values)
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)
