"""Regression forests stored as flat node arrays.

Node ids are preorder positions (root is 0, left subtree before right), so
leaves enumerated by id are already in left-to-right order. Every tree also
exposes, for each depth ``k <= max_depth``, the ordered list of nodes a
sample can occupy at that depth; a leaf that terminates above ``k`` stands
in for its branch at the deeper levels.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, SubsetPlan

FORMAT_VERSION = 1
LEAF = -1
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 25
    max_depth: int = 4
    min_leaf_samples: int = 1
    max_features: int | None = None
    overlap_ratio: float = 1.0
    subset_size: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class Split:
    dimension: int
    threshold: float
    score: float


@dataclass(frozen=True)
class TraversalPath:
    tree_index: int
    node_ids: tuple[int, ...]
    leaf_index: int


def leaf_estimate(targets) -> float:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("leaf estimate needs at least one sample")
    return float(targets.mean())


def best_split(features, targets, min_leaf_samples: int = 1, dimensions=None) -> Split | None:
    """Exhaustive variance-reduction split search.

    Candidates are midpoints between consecutive distinct values in each
    dimension. Ties keep the lowest dimension, then the lowest threshold.
    Returns ``None`` when no candidate has a strictly positive gain.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    n = y.shape[0]
    if n < 2 * min_leaf_samples or n < 2:
        return None
    centered = y - y.mean()
    parent_sse = float(centered @ centered)
    if parent_sse <= 0.0:
        return None

    best = None
    dims = range(X.shape[1]) if dimensions is None else sorted(dimensions)
    for d in dims:
        order = np.argsort(X[:, d], kind="stable")
        xs = X[order, d]
        cs = centered[order]
        # boundary after position i (left = first i+1 samples)
        valid = xs[1:] > xs[:-1]
        n_left = np.arange(1, n)
        valid &= (n_left >= min_leaf_samples) & (n - n_left >= min_leaf_samples)
        if not valid.any():
            continue
        s1 = np.cumsum(cs)[:-1]
        s2 = np.cumsum(cs * cs)[:-1]
        left_sse = s2 - s1 * s1 / n_left
        total1, total2 = s1[-1] + cs[-1], s2[-1] + cs[-1] ** 2
        r1, r2 = total1 - s1, total2 - s2
        right_sse = r2 - r1 * r1 / (n - n_left)
        gains = np.where(valid, parent_sse - left_sse - right_sse, -np.inf)
        # gains equal up to summation rounding count as ties
        top = gains.max()
        i = int(np.argmax(gains >= top - TIE_TOLERANCE * parent_sse))
        gain = float(gains[i])
        if gain > TIE_TOLERANCE * parent_sse and (
                best is None or gain > best.score + TIE_TOLERANCE * parent_sse):
            lo, hi = xs[i], xs[i + 1]
            threshold = lo + (hi - lo) / 2.0
            if not lo <= threshold < hi:
                threshold = lo
            best = Split(d, float(threshold), gain)
    return best


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    value: np.ndarray
    max_depth: int
    parent: np.ndarray = field(init=False, repr=False)
    leaf_nodes: np.ndarray = field(init=False, repr=False)
    leaf_position: np.ndarray = field(init=False, repr=False)
    levels: tuple = field(init=False, repr=False)
    level_position: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.feature)
        arrays = dict(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            depth=np.asarray(self.depth, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )
        parent = np.full(n, -1, dtype=np.int64)
        internal = np.flatnonzero(arrays["feature"] != LEAF)
        parent[arrays["left"][internal]] = internal
        parent[arrays["right"][internal]] = internal
        leaf_nodes = np.flatnonzero(arrays["feature"] == LEAF)
        leaf_position = np.full(n, -1, dtype=np.int64)
        leaf_position[leaf_nodes] = np.arange(len(leaf_nodes))

        is_leaf = arrays["feature"] == LEAF
        levels = []
        level_position = np.full((self.max_depth + 1, n), -1, dtype=np.int64)
        for k in range(self.max_depth + 1):
            nodes = np.flatnonzero((arrays["depth"] == k) | (is_leaf & (arrays["depth"] < k)))
            levels.append(nodes)
            level_position[k, nodes] = np.arange(len(nodes))

        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name, arr in (("parent", parent), ("leaf_nodes", leaf_nodes),
                          ("leaf_position", leaf_position), ("level_position", level_position)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "levels", tuple(levels))

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_count(self) -> int:
        return len(self.leaf_nodes)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def nodes_by_depth(self) -> dict[int, list[int]]:
        return {k: [int(n) for n in np.flatnonzero(self.depth == k)]
                for k in range(int(self.depth.max()) + 1)}

    def path_nodes(self, X) -> np.ndarray:
        """Node occupied at every depth ``0..max_depth`` for each row of ``X``.

        Rows that reach a leaf early repeat that leaf in the deeper columns.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        out = np.empty((X.shape[0], self.max_depth + 1), dtype=np.int64)
        out[:, 0] = 0
        for k in range(1, self.max_depth + 1):
            feat = self.feature[node]
            internal = feat != LEAF
            go_left = X[rows, np.where(internal, feat, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)
            out[:, k] = node
        return out

    def apply(self, X) -> np.ndarray:
        """Leaf node id reached by each row."""
        return self.path_nodes(X)[:, -1]

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def ancestors(self, node: int) -> list[int]:
        """Root-to-node sequence of node ids (inclusive)."""
        chain = [int(node)]
        while self.parent[chain[-1]] >= 0:
            chain.append(int(self.parent[chain[-1]]))
        return chain[::-1]

    def lowest_common_ancestor(self, a: int, b: int) -> int:
        pa, pb = self.ancestors(a), self.ancestors(b)
        lca = 0
        for u, v in zip(pa, pb):
            if u != v:
                break
            lca = u
        return lca

    def to_nodes(self) -> list[dict]:
        nodes = []
        for i in range(self.node_count):
            if self.feature[i] == LEAF:
                nodes.append({"id": i, "kind": "leaf", "estimate": float(self.value[i]),
                              "depth": int(self.depth[i]),
                              "leaf_index": int(self.leaf_position[i])})
            else:
                nodes.append({"id": i, "kind": "split", "dim": int(self.feature[i]),
                              "thr": float(self.threshold[i]), "left": int(self.left[i]),
                              "right": int(self.right[i]), "depth": int(self.depth[i]),
                              "estimate": float(self.value[i])})
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list[dict], max_depth: int) -> "Tree":
        n = len(nodes)
        feature = np.full(n, LEAF)
        threshold = np.zeros(n)
        left = np.full(n, -1)
        right = np.full(n, -1)
        depth = np.zeros(n, dtype=np.int64)
        value = np.zeros(n)
        for node in nodes:
            i = node["id"]
            depth[i] = node["depth"]
            value[i] = node.get("estimate", 0.0)
            if node["kind"] == "split":
                feature[i], threshold[i] = node["dim"], node["thr"]
                left[i], right[i] = node["left"], node["right"]
            elif node["kind"] != "leaf":
                raise ValueError(f"unknown node kind {node['kind']!r}")
        return cls(feature, threshold, left, right, depth, value, max_depth)


def train_tree(features, targets, max_depth: int, min_leaf_samples: int = 1,
               max_features: int | None = None, seed: int | np.random.SeedSequence = 0) -> Tree:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot train a tree on an empty subset")
    rng = np.random.default_rng(seed)
    feature, threshold, left, right, depth, value = [], [], [], [], [], []

    def grow(rows, level):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        depth.append(level)
        value.append(leaf_estimate(y[rows]))
        if level >= max_depth or len(rows) < 2 * min_leaf_samples:
            return node
        dims = None
        if max_features is not None and max_features < X.shape[1]:
            dims = rng.choice(X.shape[1], size=max_features, replace=False)
        split = best_split(X[rows], y[rows], min_leaf_samples, dims)
        if split is None:
            return node
        mask = X[rows, split.dimension] <= split.threshold
        feature[node] = split.dimension
        threshold[node] = split.threshold
        left[node] = grow(rows[mask], level + 1)
        right[node] = grow(rows[~mask], level + 1)
        return node

    grow(np.arange(len(y)), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(depth), np.array(value), max_depth)


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    config: ForestConfig = field(default_factory=ForestConfig)
    leaf_offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        counts = [t.leaf_count for t in self.trees]
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        offsets.setflags(write=False)
        object.__setattr__(self, "leaf_offsets", offsets)

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    @property
    def max_depth(self) -> int:
        return max(t.max_depth for t in self.trees)

    @property
    def total_leaves(self) -> int:
        return int(self.leaf_offsets[-1])

    def leaves(self, X) -> np.ndarray:
        """Per-tree local leaf positions, shape (n, T)."""
        return np.stack([t.leaf_position[t.apply(X)] for t in self.trees], axis=1)

    def tree_predictions(self, X) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees], axis=1)

    def predict(self, X) -> np.ndarray:
        if not self.trees:
            raise ValueError("cannot predict with an empty forest")
        return average_trees([t.predict(X) for t in self.trees])

    def subset(self, tree_indices) -> "Forest":
        cfg = ForestConfig(**{**asdict(self.config), "tree_count": len(tree_indices)})
        return Forest(tuple(self.trees[i] for i in tree_indices), cfg)

    def to_dict(self, extra: dict | None = None) -> dict:
        doc = {"version": FORMAT_VERSION, "config": asdict(self.config),
               "trees": [{"max_depth": t.max_depth, "nodes": t.to_nodes()} for t in self.trees]}
        if extra:
            doc.update(extra)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        cfg = ForestConfig(**doc["config"])
        trees = [Tree.from_nodes(t["nodes"], t.get("max_depth", cfg.max_depth))
                 for t in doc["trees"]]
        return cls(tuple(trees), cfg)


def traverse(tree: Tree, x, tree_index: int = 0, leaf_offset: int = 0) -> TraversalPath:
    x = np.asarray(x, dtype=np.float64)
    node = 0
    path = [0]
    while tree.feature[node] != LEAF:
        node = int(tree.left[node] if x[tree.feature[node]] <= tree.threshold[node]
                   else tree.right[node])
        path.append(node)
    return TraversalPath(tree_index, tuple(path), leaf_offset + int(tree.leaf_position[node]))


def forest_paths(forest: Forest, x) -> list[TraversalPath]:
    return [traverse(t, x, i, int(forest.leaf_offsets[i])) for i, t in enumerate(forest.trees)]


def predict(forest: Forest, x) -> float:
    if not forest.trees:
        raise ValueError("cannot predict with an empty forest")
    x = np.asarray(x, dtype=np.float64)
    return average_trees([tree.value[_leaf_node(tree, x)] for tree in forest.trees])


def average_trees(per_tree):
    """Left-to-right sum over trees divided by T; every predictor shares this order."""
    total = per_tree[0] * 1.0
    for value in per_tree[1:]:
        total = total + value
    return total / len(per_tree)


def _leaf_node(tree: Tree, x) -> int:
    node = 0
    while tree.feature[node] != LEAF:
        node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return int(node)


def tree_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def train_forest(dataset: Dataset, plan: SubsetPlan, config: ForestConfig,
                 n_jobs: int = 1) -> Forest:
    """One tree per subset; per-tree seeds are spawned from ``config.seed``."""
    if plan.tree_count != config.tree_count:
        raise ValueError(f"plan has {plan.tree_count} subsets, config wants {config.tree_count}")
    seeds = tree_seeds(config.seed, plan.tree_count)

    def fit(t):
        rows = plan.subsets[t]
        return train_tree(dataset.features[rows], dataset.targets[rows], config.max_depth,
                          config.min_leaf_samples, config.max_features, seeds[t])

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(fit, range(plan.tree_count)))
    else:
        trees = [fit(t) for t in range(plan.tree_count)]
    return Forest(tuple(trees), config)


def save_model(forest: Forest, path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(forest.to_dict(extra)))


def load_model(path) -> tuple[Forest, dict]:
    doc = json.loads(Path(path).read_text())
    return Forest.from_dict(doc), doc
