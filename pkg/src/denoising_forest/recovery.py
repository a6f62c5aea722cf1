"""Compare original and DAE-refined traversals to flag suspect decision nodes."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dae import DenoisingAutoencoder, forward
from .forest import LEAF, Forest, Tree
from .indicator import encoded_indicators, level_offsets, segment_argmax


@dataclass(frozen=True)
class FlagReport:
    per_tree_flags: tuple[frozenset, ...]
    refined_leaves: np.ndarray   # per tree, local leaf position chosen by the DAE
    original_leaves: np.ndarray  # per tree, local leaf position from traversal

    @property
    def flag_count(self) -> int:
        return sum(len(f) for f in self.per_tree_flags)


@dataclass(frozen=True)
class BatchRecovery:
    """Recovery results for many samples at once."""

    flags: tuple[tuple[frozenset, ...], ...]
    refined_leaves: np.ndarray   # (n, T)
    original_leaves: np.ndarray  # (n, T)
    leaf_output: np.ndarray      # (n, N) raw DAE output at leaf depth

    def report(self, i: int) -> FlagReport:
        return FlagReport(self.flags[i], self.refined_leaves[i], self.original_leaves[i])

    def __len__(self) -> int:
        return len(self.flags)


def _check_stack(forest: Forest, stack: dict[int, DenoisingAutoencoder]) -> None:
    if forest.max_depth not in stack:
        raise ValueError(f"autoencoder stack lacks the leaf depth {forest.max_depth}")
    for depth, dae in stack.items():
        width = int(level_offsets(forest, depth)[-1])
        if dae.input_size != width:
            raise ValueError(
                f"depth-{depth} autoencoder expects {dae.input_size} inputs, forest has {width}"
            )


def refined_positions(forest: Forest, dae: DenoisingAutoencoder, X, depth: int):
    """Original and DAE-refined level positions plus the raw DAE output."""
    Z, original = encoded_indicators(forest, X, depth, dae.encoding)
    out = forward(dae, Z)
    return original, segment_argmax(out, level_offsets(forest, depth)), out


def recover_many(forest: Forest, stack: dict[int, DenoisingAutoencoder], X) -> BatchRecovery:
    """Flag decision nodes for every row of ``X``.

    With only a leaf-depth autoencoder, a disagreeing tree flags the lowest
    common ancestor of its original and refined leaves. With a per-depth
    stack, depth ``k`` flags the original depth-``k-1`` node when the
    refined and original depth-``k`` nodes differ while depth ``k-1`` agrees.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_stack(forest, stack)
    leaf_depth = forest.max_depth
    orig_leaf, ref_leaf, leaf_out = refined_positions(forest, stack[leaf_depth], X, leaf_depth)
    n, T = orig_leaf.shape
    flags = [[set() for _ in range(T)] for _ in range(n)]

    if set(stack) == {leaf_depth}:
        for t, tree in enumerate(forest.trees):
            for i in np.flatnonzero(orig_leaf[:, t] != ref_leaf[:, t]):
                a = int(tree.leaf_nodes[orig_leaf[i, t]])
                b = int(tree.leaf_nodes[ref_leaf[i, t]])
                flags[i][t].add(tree.lowest_common_ancestor(a, b))
    else:
        agreement = {0: np.ones((n, T), dtype=bool)}  # the root always agrees
        for k in range(1, leaf_depth + 1):
            if k in stack:
                orig_k, ref_k, _ = refined_positions(forest, stack[k], X, k)
                agreement[k] = orig_k == ref_k
            else:
                agreement[k] = np.ones((n, T), dtype=bool)
        for k in range(leaf_depth, 0, -1):
            onset = ~agreement[k] & agreement[k - 1]
            if not onset.any():
                continue
            for t, tree in enumerate(forest.trees):
                rows = np.flatnonzero(onset[:, t])
                if rows.size == 0:
                    continue
                above = tree.path_nodes(X[rows])[:, min(k - 1, tree.max_depth)]
                for i, node in zip(rows, above):
                    if tree.feature[node] != LEAF:
                        flags[i][t].add(int(node))

    frozen = tuple(tuple(frozenset(f) for f in row) for row in flags)
    return BatchRecovery(frozen, ref_leaf, orig_leaf, leaf_out)


def recover(forest: Forest, stack: dict[int, DenoisingAutoencoder], x) -> FlagReport:
    return recover_many(forest, stack, np.atleast_2d(x)).report(0)


def wrong_decisions(tree: Tree, clean, noisy) -> list[frozenset]:
    """Nodes on each clean path where the noisy row takes the other branch."""
    clean = np.atleast_2d(clean)
    noisy = np.atleast_2d(noisy)
    paths = tree.path_nodes(clean)
    out = []
    for row in range(clean.shape[0]):
        wrong = set()
        for node in np.unique(paths[row]):
            d = tree.feature[node]
            if d != LEAF and (clean[row, d] <= tree.threshold[node]) != (
                    noisy[row, d] <= tree.threshold[node]):
                wrong.add(int(node))
        out.append(frozenset(wrong))
    return out


def divergence_onsets(tree: Tree, clean, noisy) -> list[frozenset]:
    """The decision node where clean and noisy traversals first part, if any."""
    a = tree.path_nodes(np.atleast_2d(clean))
    b = tree.path_nodes(np.atleast_2d(noisy))
    out = []
    for pa, pb in zip(a, b):
        diff = np.flatnonzero(pa != pb)
        out.append(frozenset() if diff.size == 0 else frozenset({int(pa[diff[0] - 1])}))
    return out


def true_flags(forest: Forest, clean, noisy, onset_only: bool = True):
    """Ground-truth flags per sample and tree from clean-vs-noisy traversal."""
    rule = divergence_onsets if onset_only else wrong_decisions
    per_tree = [rule(tree, clean, noisy) for tree in forest.trees]
    return tuple(tuple(col[i] for col in per_tree) for i in range(len(per_tree[0])))


def detection_rate(report: FlagReport | tuple, ground_truth) -> float:
    """Fraction of true flagged nodes that were also flagged, pooled over trees."""
    flags = report.per_tree_flags if isinstance(report, FlagReport) else report
    truth = sum(len(g) for g in ground_truth)
    hit = sum(len(set(f) & set(g)) for f, g in zip(flags, ground_truth))
    if truth == 0:
        return 1.0 if sum(len(f) for f in flags) == 0 else 0.0
    return hit / truth


def write_flags(path, flags) -> None:
    """Write ``sample_index,tree_index,flagged_nodes`` rows (nodes ';'-separated)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "tree_index", "flagged_nodes"])
        for i, per_tree in enumerate(flags):
            for t, nodes in enumerate(per_tree):
                writer.writerow([i, t, ";".join(str(n) for n in sorted(nodes))])
