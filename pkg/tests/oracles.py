"""Slow, obviously-correct reference implementations used by the test suite.

Nothing here is vectorized on purpose: each function follows the textbook
definition with plain loops so it can be checked by eye.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, deque
from fractions import Fraction

import numpy as np

from denoising_forest.forest import LEAF, Tree


# ---------------------------------------------------------------- toy trees

def perfect_tree(depth: int, dim: int = 0, values=None) -> Tree:
    """Perfect binary tree on [0, 1] that bisects feature ``dim`` at every level.

    Leaf ``j`` (left to right) covers ``(j / 2**depth, (j + 1) / 2**depth]``
    and predicts ``values[j]`` (default ``j``).
    """
    n_leaves = 2 ** depth
    values = list(range(n_leaves)) if values is None else list(values)
    feature, threshold, left, right, level, value = [], [], [], [], [], []

    def grow(lo, hi, k, first_leaf):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        level.append(k)
        value.append(0.0)
        if k == depth:
            value[node] = float(values[first_leaf])
            return node
        mid = (lo + hi) / 2
        feature[node], threshold[node] = dim, mid
        half = 2 ** (depth - k - 1)
        left[node] = grow(lo, mid, k + 1, first_leaf)
        right[node] = grow(mid, hi, k + 1, first_leaf + half)
        value[node] = float(np.mean(values[first_leaf:first_leaf + 2 * half]))
        return node

    grow(0.0, 1.0, 0, 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(level), np.array(value), depth)


def leaf_point(depth: int, leaf: int) -> float:
    """A coordinate that ``perfect_tree(depth)`` routes to ``leaf``."""
    return (leaf + 0.5) / 2 ** depth


# ---------------------------------------------------------------- splits

def sse(values) -> Fraction:
    """Exact sum of squared deviations; rationals keep genuine ties exact."""
    values = [Fraction(v) for v in values]
    if not values:
        return Fraction(0)
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values)


def brute_best_split(X, y, min_leaf: int = 1):
    """Every midpoint of every dimension, scored as parent SSE minus child SSEs.

    Returns ``(dim, threshold, gain)`` for the best positive gain, ties going
    to the lowest dimension and then the lowest threshold; ``None`` otherwise.
    """
    X = np.asarray(X, dtype=float)
    y = [float(v) for v in y]
    parent = sse(y)
    best = None
    for d in range(X.shape[1]):
        distinct = sorted(set(X[:, d].tolist()))
        for a, b in zip(distinct, distinct[1:]):
            theta = (a + b) / 2
            lhs = [y[i] for i in range(len(y)) if X[i, d] <= theta]
            rhs = [y[i] for i in range(len(y)) if X[i, d] > theta]
            if len(lhs) < min_leaf or len(rhs) < min_leaf:
                continue
            gain = parent - sse(lhs) - sse(rhs)
            if gain > 0 and (best is None or gain > best[2]):
                best = (d, theta, gain)
    if best is None:
        return None
    return best[0], best[1], float(best[2])


# ---------------------------------------------------------------- entropy

def entropy_of(labels) -> float:
    counts = Counter(labels)
    n = sum(counts.values())
    return -math.fsum(c / n * math.log2(c / n) for c in counts.values())


def walk(tree: Tree, x) -> list[int]:
    """Root-to-leaf node ids by direct pointer chasing."""
    node, path = 0, [0]
    while tree.feature[node] != LEAF:
        node = int(tree.left[node] if x[tree.feature[node]] <= tree.threshold[node]
                   else tree.right[node])
        path.append(node)
    return path


def leaf_of(tree: Tree, x) -> int:
    return walk(tree, x)[-1]


def brute_cross_entropy(tree_t: Tree, tree_u: Tree, X, normalize: bool = False) -> float:
    """Average over the leaves of ``tree_t`` of the ``tree_u`` leaf entropy of that leaf's samples.

    Every leaf of ``tree_t`` counts in the average; an empty leaf adds 0.
    """
    groups = {int(n): [] for n in tree_t.leaf_nodes}
    for x in X:
        groups[leaf_of(tree_t, x)].append(leaf_of(tree_u, x))
    scale = math.log2(tree_u.leaf_count) if normalize else 1.0
    if scale == 0.0:
        return 0.0
    total = math.fsum(entropy_of(g) / scale for g in groups.values() if g)
    return total / tree_t.leaf_count


# ---------------------------------------------------------------- distances

def bfs_distance(tree: Tree, a: int, b: int) -> int:
    """Edge count between two nodes by breadth-first search on the undirected tree."""
    adj = {i: [] for i in range(tree.node_count)}
    for i in range(tree.node_count):
        if tree.feature[i] != LEAF:
            for c in (int(tree.left[i]), int(tree.right[i])):
                adj[i].append(c)
                adj[c].append(i)
    seen = {a: 0}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    return seen[b]


def level_nodes(tree: Tree, depth: int) -> list[int]:
    """Nodes a sample can occupy at ``depth``: nodes at that depth, and shallower leaves."""
    return [i for i in range(tree.node_count)
            if tree.depth[i] == depth or (tree.feature[i] == LEAF and tree.depth[i] < depth)]


def brute_distance_segment(tree: Tree, x, depth: int) -> list[float]:
    path = walk(tree, x)
    here = path[min(depth, len(path) - 1)]
    out = []
    for node in level_nodes(tree, depth):
        d = bfs_distance(tree, here, node)
        out.append(1.0 if d == 0 else 2.0 / d)
    return out


# ---------------------------------------------------------------- multipath

def all_leaf_paths(tree: Tree) -> list[list[int]]:
    """Every root-to-leaf path of the tree, left to right."""
    out = []

    def rec(node, path):
        path = path + [node]
        if tree.feature[node] == LEAF:
            out.append(path)
        else:
            rec(int(tree.left[node]), path)
            rec(int(tree.right[node]), path)

    rec(0, [])
    return out


def brute_paths(tree: Tree, x, flagged) -> dict[tuple, int]:
    """Enumerated paths as {node tuple: flagged count}.

    A root-to-leaf path is generated exactly when, at every unflagged internal
    node it passes, it takes the branch that ``x`` takes.
    """
    flagged = set(flagged)
    out = {}
    for path in all_leaf_paths(tree):
        ok = True
        for node, nxt in zip(path, path[1:]):
            if node in flagged:
                continue
            goes_left = x[tree.feature[node]] <= tree.threshold[node]
            if nxt != (tree.left[node] if goes_left else tree.right[node]):
                ok = False
                break
        if ok:
            out[tuple(path)] = sum(1 for n in path if n in flagged)
    return out


def internal_nodes(tree: Tree) -> list[int]:
    return [i for i in range(tree.node_count) if tree.feature[i] != LEAF]


def all_subsets(items):
    items = list(items)
    return itertools.chain.from_iterable(itertools.combinations(items, r)
                                         for r in range(len(items) + 1))


# ---------------------------------------------------------------- autoencoder

def numeric_bce(output, target, clamp=1e-7) -> float:
    total = 0.0
    count = 0
    for o, t in zip(np.ravel(output), np.ravel(target)):
        o = min(max(float(o), clamp), 1 - clamp)
        total += -(t * math.log(o) + (1 - t) * math.log(1 - o))
        count += 1
    return total / count
