import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from denoising_forest.data import Dataset, make_subsets
from denoising_forest.forest import Forest, ForestConfig, train_forest, train_tree
from denoising_forest.treeselect import (cross_entropy_pair, entropy_report,
                                         occupancy_entropy, pre_selection_count, select_trees,
                                         selection_indices, tree_entropy)
from oracles import brute_cross_entropy, entropy_of, leaf_of, perfect_tree


def test_one_leaf_has_zero_entropy():
    assert occupancy_entropy([3, 3, 3]) == 0.0


def test_uniform_over_four_leaves():
    assert occupancy_entropy([0, 1, 2, 3]) == 2.0


def test_four_two_two():
    assert occupancy_entropy([0] * 4 + [1] * 2 + [2] * 2) == 1.5


def test_tree_entropy_on_a_perfect_tree():
    X = [[(j + 0.5) / 4] for j in range(4)]
    assert tree_entropy(perfect_tree(2), X) == 2.0


def test_single_leaf_partner_gives_zero():
    stump = train_tree([[0.0]], [1.0], max_depth=2)
    X = np.random.default_rng(0).uniform(size=(10, 1))
    assert cross_entropy_pair(perfect_tree(2), stump, X) == 0.0


def test_identical_trees_give_zero():
    X = np.random.default_rng(0).uniform(size=(30, 1))
    assert cross_entropy_pair(perfect_tree(3), perfect_tree(3), X) == 0.0


def test_unit_square_corners():
    a, b = perfect_tree(1, dim=0), perfect_tree(1, dim=1)
    corners = [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert cross_entropy_pair(a, b, corners) == 1.0


def test_empty_leaf_still_counts_in_divisor():
    # all samples land in the left leaf of tree_t, which splits 2/2 in tree_u
    t, u = perfect_tree(1, dim=0), perfect_tree(1, dim=1)
    X = [[0.1, 0.1], [0.1, 0.9]]
    assert cross_entropy_pair(t, u, X) == 0.5


def random_tree(rng, depth, d=2):
    X = rng.uniform(size=(24, d))
    return train_tree(X, rng.normal(size=24), depth, seed=int(rng.integers(1 << 30)))


@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 3), st.integers(1, 64))
def test_pair_matches_histogram_oracle(seed, dt, du, n):
    rng = np.random.default_rng(seed)
    t, u = random_tree(rng, dt), random_tree(rng, du)
    X = rng.uniform(size=(n, 2))
    assert cross_entropy_pair(t, u, X) == pytest.approx(brute_cross_entropy(t, u, X), abs=1e-12)


@given(st.integers(0, 2**31), st.integers(1, 64))
def test_tree_entropy_matches_counting(seed, n):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, 3)
    X = rng.uniform(size=(n, 2))
    want = entropy_of(leaf_of(tree, x) for x in X)
    assert tree_entropy(tree, X) == pytest.approx(want, abs=1e-12)
    assert 0.0 <= tree_entropy(tree, X) <= math.log2(tree.leaf_count) + 1e-12


def forest_of(trees, depth=3, overlap=1.0, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(200, 3))
    ds = Dataset(X, X[:, 0] + np.sin(5 * X[:, 1]) + 0.1 * rng.normal(size=200))
    cfg = ForestConfig(trees, depth, overlap_ratio=overlap, seed=seed)
    return train_forest(ds, make_subsets(ds, trees, overlap, seed=seed), cfg), X


def test_report_matches_oracle():
    forest, X = forest_of(4)
    rep = entropy_report(forest, X[:64])
    for t in range(4):
        for u in range(4):
            if t != u:
                a, b = forest.trees[t], forest.trees[u]
                assert rep.pair_matrix[t, u] == pytest.approx(brute_cross_entropy(a, b, X[:64]))
                assert rep.normalized_mean is not None
    want = [np.mean([brute_cross_entropy(forest.trees[t], forest.trees[u], X[:64], normalize=True)
                     for u in range(4) if u != t]) for t in range(4)]
    np.testing.assert_allclose(rep.normalized_mean, want, atol=1e-12)


def test_two_tree_report():
    forest, X = forest_of(2)
    rep = entropy_report(forest, X)
    assert rep.mean_per_tree[0] == rep.pair_matrix[0, 1]
    assert rep.eval_set_size == len(X)


def test_identical_forest_has_zero_means():
    tree = perfect_tree(2)
    rep = entropy_report(Forest((tree, tree, tree)), np.random.default_rng(0).uniform(size=(20, 1)))
    np.testing.assert_array_equal(rep.mean_per_tree, 0.0)


def test_report_needs_two_trees():
    forest, X = forest_of(1)
    with pytest.raises(ValueError):
        entropy_report(forest, X)


def test_rank_selection():
    assert selection_indices([0.9, 0.1, 0.5, 0.3], 0.5) == [1, 3]


def test_keep_all_is_identity():
    forest, X = forest_of(5)
    chosen = select_trees(forest, entropy_report(forest, X), 1.0)
    assert chosen.trees == forest.trees


def test_selection_preserves_order_and_reindexes_leaves():
    forest, X = forest_of(6)
    rep = entropy_report(forest, X)
    chosen = select_trees(forest, rep, 0.5)
    idx = selection_indices(rep.mean_per_tree, 0.5)
    assert chosen.trees == tuple(forest.trees[i] for i in idx)
    counts = [forest.trees[i].leaf_count for i in idx]
    assert chosen.leaf_offsets.tolist() == np.concatenate([[0], np.cumsum(counts)]).tolist()


def test_selection_is_permutation_invariant():
    forest, X = forest_of(6)
    perm = [3, 0, 5, 1, 4, 2]
    shuffled = Forest(tuple(forest.trees[i] for i in perm))
    a = select_trees(forest, entropy_report(forest, X), 0.5)
    b = select_trees(shuffled, entropy_report(shuffled, X), 0.5)
    assert {id(t) for t in a.trees} == {id(t) for t in b.trees}


@pytest.mark.parametrize("after,keep,before", [(15, 0.7, 21), (20, 0.7, 28), (35, 0.7, 50),
                                               (15, 1.0, 15)])
def test_pre_selection_count(after, keep, before):
    assert pre_selection_count(after, keep) == before
    assert len(selection_indices(np.zeros(before), keep)) == after


def test_entropy_csv(tmp_path):
    forest, X = forest_of(3)
    entropy_report(forest, X).to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "tree_index,entropy,mean_cross_entropy,normalized_mean_cross_entropy"
    assert len(lines) == 4
