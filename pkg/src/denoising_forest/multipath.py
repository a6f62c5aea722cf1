"""Multi-path estimation: branch both ways at flagged nodes, weight paths by 2**-k."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import LEAF, Forest, Tree, average_trees


@dataclass(frozen=True)
class WeightedPath:
    tree_index: int
    node_ids: tuple[int, ...]
    leaf_index: int
    flagged_count: int

    @property
    def weight(self) -> float:
        return 2.0 ** -self.flagged_count


def enumerate_paths(tree: Tree, x, flagged=frozenset(), tree_index: int = 0) -> list[WeightedPath]:
    """Depth-first expansion of ``x``'s traversal, taking both children at flagged nodes."""
    x = np.asarray(x, dtype=np.float64)
    flagged = frozenset(int(n) for n in flagged)
    for node in flagged:
        if not 0 <= node < tree.node_count:
            raise ValueError(f"flagged node {node} is not in this tree")

    paths = []
    stack = [((0,), 0)]
    while stack:
        nodes, k = stack.pop()
        node = nodes[-1]
        if tree.feature[node] == LEAF:
            paths.append(WeightedPath(tree_index, nodes, int(tree.leaf_position[node]), k))
            continue
        left, right = int(tree.left[node]), int(tree.right[node])
        if node in flagged:
            stack.append((nodes + (right,), k + 1))
            stack.append((nodes + (left,), k + 1))
        elif x[tree.feature[node]] <= tree.threshold[node]:
            stack.append((nodes + (left,), k))
        else:
            stack.append((nodes + (right,), k))
    return paths


def tree_estimate(tree: Tree, x, flagged=frozenset()) -> float:
    """Weighted sum of leaf estimates over the enumerated paths of one tree."""
    total = 0.0
    for path in enumerate_paths(tree, x, flagged):
        total += path.weight * tree.value[path.node_ids[-1]]
    return total


def multipath_predict(forest: Forest, x, flags) -> float:
    """Average over trees of the per-tree weighted path estimates.

    ``flags`` is a per-tree sequence of flagged node ids, or a FlagReport.
    """
    flags = getattr(flags, "per_tree_flags", flags)
    per_tree = [tree_estimate(tree, x, f) for tree, f in zip(forest.trees, flags)]
    return float(average_trees(per_tree))


def multipath_predict_many(forest: Forest, X, flags) -> np.ndarray:
    """Row-wise ``multipath_predict``; unflagged trees use the vectorized leaf lookup."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    columns = []
    for t, tree in enumerate(forest.trees):
        col = tree.predict(X)
        for i, per_tree in enumerate(flags):
            if per_tree[t]:
                col[i] = tree_estimate(tree, X[i], per_tree[t])
        columns.append(col)
    return average_trees(columns)


def refined_predict_many(forest: Forest, refined_leaves) -> np.ndarray:
    """Forest output when each tree's leaf is replaced by the given local leaf position."""
    refined_leaves = np.asarray(refined_leaves)
    return average_trees([tree.value[tree.leaf_nodes[refined_leaves[:, t]]]
                          for t, tree in enumerate(forest.trees)])
