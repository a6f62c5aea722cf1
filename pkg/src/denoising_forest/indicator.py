"""Per-depth indicator vectors over a forest's nodes.

At depth ``k`` each tree contributes one segment holding its level-``k``
nodes in left-to-right order. The binary form marks the node the sample
occupies; the distance form gives every other node ``2 / d`` where ``d`` is
its edge distance to the occupied node inside the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .forest import Forest, Tree


@dataclass(frozen=True)
class IndicatorVector:
    depth: int
    values: np.ndarray
    tree_offsets: np.ndarray
    arrived: np.ndarray  # per tree, position of the occupied node in its segment

    def segment(self, t: int) -> np.ndarray:
        return self.values[self.tree_offsets[t]:self.tree_offsets[t + 1]]


def node_distance(tree: Tree, a: int, b: int) -> int:
    """Edge count of the tree path between nodes ``a`` and ``b``."""
    n = tree.node_count
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"nodes {a}, {b} are not both in this tree ({n} nodes)")
    lca = tree.lowest_common_ancestor(a, b)
    return int(tree.depth[a] + tree.depth[b] - 2 * tree.depth[lca])


def _level(tree: Tree, depth: int) -> int:
    # a tree shallower than the forest keeps its deepest level below that depth
    return min(depth, tree.max_depth)


@lru_cache(maxsize=8192)
def _level_tables(tree: Tree, depth: int):
    nodes = tree.levels[_level(tree, depth)]
    L = len(nodes)
    dist = np.zeros((L, L), dtype=np.int64)
    for i in range(L):
        for j in range(i + 1, L):
            dist[i, j] = dist[j, i] = node_distance(tree, int(nodes[i]), int(nodes[j]))
    values = np.ones((L, L))
    off = dist > 0
    values[off] = 2.0 / dist[off]
    dist.setflags(write=False)
    values.setflags(write=False)
    return dist, values


def level_distances(tree: Tree, depth: int) -> np.ndarray:
    return _level_tables(tree, depth)[0]


def level_offsets(forest: Forest, depth: int) -> np.ndarray:
    sizes = [len(t.levels[_level(t, depth)]) for t in forest.trees]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def arrived_positions(forest: Forest, X, depth: int) -> np.ndarray:
    """Position of the occupied level-``depth`` node in each tree segment, shape (n, T)."""
    X = np.atleast_2d(X)
    cols = []
    for tree in forest.trees:
        k = _level(tree, depth)
        cols.append(tree.level_position[k, tree.path_nodes(X)[:, k]])
    return np.stack(cols, axis=1)


def binary_indicators(forest: Forest, X, depth: int | None = None):
    depth = forest.max_depth if depth is None else depth
    _check_depth(forest, depth)
    pos = arrived_positions(forest, X, depth)
    offsets = level_offsets(forest, depth)
    Z = np.zeros((pos.shape[0], offsets[-1]))
    rows = np.arange(pos.shape[0])
    for t in range(forest.tree_count):
        Z[rows, offsets[t] + pos[:, t]] = 1.0
    return Z, pos


def distance_indicators(forest: Forest, X, depth: int | None = None):
    depth = forest.max_depth if depth is None else depth
    _check_depth(forest, depth)
    pos = arrived_positions(forest, X, depth)
    offsets = level_offsets(forest, depth)
    Z = np.empty((pos.shape[0], offsets[-1]))
    for t, tree in enumerate(forest.trees):
        Z[:, offsets[t]:offsets[t + 1]] = _level_tables(tree, depth)[1][pos[:, t]]
    return Z, pos


ENCODINGS = ("distance", "marked", "binary")


def encoded_indicators(forest: Forest, X, depth: int | None = None, encoding: str = "distance"):
    """Autoencoder input vectors.

    ``distance`` is the plain distance form, in which the occupied node and its
    sibling both read 1. ``marked`` averages the distance and binary forms so
    the occupied node (1) stands above its sibling (0.5).
    """
    if encoding == "distance":
        return distance_indicators(forest, X, depth)
    if encoding == "binary":
        return binary_indicators(forest, X, depth)
    if encoding == "marked":
        Z, pos = distance_indicators(forest, X, depth)
        B, _ = binary_indicators(forest, X, depth)
        return 0.5 * (Z + B), pos
    raise ValueError(f"unknown indicator encoding {encoding!r}; choose from {ENCODINGS}")


def binary_indicator(forest: Forest, x, depth: int | None = None) -> IndicatorVector:
    depth = forest.max_depth if depth is None else depth
    Z, pos = binary_indicators(forest, x, depth)
    return IndicatorVector(depth, Z[0], level_offsets(forest, depth), pos[0])


def distance_indicator(forest: Forest, x, depth: int | None = None) -> IndicatorVector:
    depth = forest.max_depth if depth is None else depth
    Z, pos = distance_indicators(forest, x, depth)
    return IndicatorVector(depth, Z[0], level_offsets(forest, depth), pos[0])


def segment_argmax(values, tree_offsets) -> np.ndarray:
    """Per-segment argmax (lowest index on ties); works row-wise on 2-D input."""
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == 1
    V = np.atleast_2d(values)
    out = np.empty((V.shape[0], len(tree_offsets) - 1), dtype=np.int64)
    for t in range(len(tree_offsets) - 1):
        lo, hi = tree_offsets[t], tree_offsets[t + 1]
        if hi <= lo:
            raise ValueError(f"tree segment {t} is empty")
        out[:, t] = np.argmax(V[:, lo:hi], axis=1)
    return out[0] if single else out


def binarize(values, tree_offsets, depth: int = -1) -> IndicatorVector:
    values = np.asarray(values, dtype=np.float64)
    tree_offsets = np.asarray(tree_offsets, dtype=np.int64)
    pos = segment_argmax(values, tree_offsets)
    out = np.zeros_like(values)
    out[tree_offsets[:-1] + pos] = 1.0
    return IndicatorVector(depth, out, tree_offsets, pos)


def _check_depth(forest: Forest, depth: int) -> None:
    if not 0 <= depth <= forest.max_depth:
        raise ValueError(f"depth {depth} outside 0..{forest.max_depth}")
