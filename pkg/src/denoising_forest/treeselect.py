"""Leaf-occupancy entropy between trees, and selection of correlated trees."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forest import Forest, Tree


@dataclass(frozen=True)
class EntropyReport:
    per_tree_entropy: np.ndarray
    pair_matrix: np.ndarray
    mean_per_tree: np.ndarray
    normalized_mean: np.ndarray
    eval_set_size: int

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tree_index", "entropy", "mean_cross_entropy",
                             "normalized_mean_cross_entropy"])
            for t in range(len(self.per_tree_entropy)):
                writer.writerow([t, repr(float(self.per_tree_entropy[t])),
                                 repr(float(self.mean_per_tree[t])),
                                 repr(float(self.normalized_mean[t]))])


def occupancy_entropy(leaf_ids, n_leaves: int | None = None) -> float:
    """Base-2 entropy of the empirical distribution of ``leaf_ids``."""
    leaf_ids = np.asarray(leaf_ids)
    if leaf_ids.size == 0:
        raise ValueError("entropy of an empty sample set is undefined")
    counts = np.bincount(leaf_ids, minlength=n_leaves or 0)
    p = counts[counts > 0] / leaf_ids.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def tree_entropy(tree: Tree, X) -> float:
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValueError("entropy of an empty sample set is undefined")
    return occupancy_entropy(tree.leaf_position[tree.apply(X)], tree.leaf_count)


def _pair_from_leaves(leaves_t, leaves_u, n_leaves_t: int, n_leaves_u: int,
                      normalize: bool = False) -> float:
    # empty leaves of the first tree contribute 0 but still count in the divisor
    scale = math.log2(n_leaves_u) if normalize else 1.0
    if normalize and scale == 0.0:
        return 0.0
    joint = np.bincount(leaves_t * n_leaves_u + leaves_u,
                        minlength=n_leaves_t * n_leaves_u).reshape(n_leaves_t, n_leaves_u)
    rows = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = joint / np.where(rows > 0, rows, 1)
        terms = np.where(joint > 0, -p * np.log2(np.where(joint > 0, p, 1.0)), 0.0)
    return float(terms.sum(axis=1).sum() / scale / n_leaves_t) + 0.0


def cross_entropy_pair(tree_t: Tree, tree_u: Tree, X) -> float:
    """Mean entropy, in ``tree_u``, of the sample groups formed by ``tree_t``'s leaves."""
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValueError("cross entropy of an empty sample set is undefined")
    lt = tree_t.leaf_position[tree_t.apply(X)]
    lu = tree_u.leaf_position[tree_u.apply(X)]
    return _pair_from_leaves(lt, lu, tree_t.leaf_count, tree_u.leaf_count)


def entropy_report(forest: Forest, X) -> EntropyReport:
    X = np.atleast_2d(X)
    T = forest.tree_count
    if T < 2:
        raise ValueError("entropy report needs at least two trees")
    if X.shape[0] == 0:
        raise ValueError("entropy report needs a non-empty sample set")
    leaves = forest.leaves(X)
    counts = [t.leaf_count for t in forest.trees]
    H = np.array([occupancy_entropy(leaves[:, t], counts[t]) for t in range(T)])
    C = np.zeros((T, T))
    Cn = np.zeros((T, T))
    for t in range(T):
        for u in range(T):
            if t != u:
                C[t, u] = _pair_from_leaves(leaves[:, t], leaves[:, u], counts[t], counts[u])
                Cn[t, u] = _pair_from_leaves(leaves[:, t], leaves[:, u], counts[t], counts[u],
                                             normalize=True)
    mean = C.sum(axis=1) / (T - 1)
    normalized = Cn.sum(axis=1) / (T - 1)
    return EntropyReport(H, C, mean, normalized, X.shape[0])


def selection_indices(mean_per_tree, keep_fraction: float) -> list[int]:
    T = len(mean_per_tree)
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    keep = max(1, math.ceil(keep_fraction * T - 1e-9))
    ranked = np.argsort(np.asarray(mean_per_tree), kind="stable")[:keep]
    return sorted(int(i) for i in ranked)


def select_trees(forest: Forest, report: EntropyReport, keep_fraction: float = 0.7) -> Forest:
    """Keep the ``ceil(keep_fraction * T)`` trees with the lowest mean cross entropy."""
    return forest.subset(selection_indices(report.mean_per_tree, keep_fraction))


def pre_selection_count(trees_after: int, keep_fraction: float) -> int:
    """Largest forest size whose selection keeps exactly ``trees_after`` trees."""
    T = trees_after
    while max(1, math.ceil(keep_fraction * T - 1e-9)) < trees_after:
        T += 1
    while max(1, math.ceil(keep_fraction * (T + 1) - 1e-9)) == trees_after:
        T += 1
    return T
