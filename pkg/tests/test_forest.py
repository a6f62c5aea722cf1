import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from denoising_forest.data import Dataset, make_subsets
from denoising_forest.forest import (Forest, ForestConfig, average_trees, best_split,
                                     forest_paths, leaf_estimate, load_model, predict, save_model,
                                     traverse, train_forest, train_tree)
from oracles import brute_best_split, perfect_tree, walk


def test_four_point_split():
    s = best_split([[0], [1], [2], [3]], [0, 0, 1, 1])
    assert (s.dimension, s.threshold) == (0, 1.5)
    assert s.score == pytest.approx(1.0)


def test_constant_targets_do_not_split():
    assert best_split([[0], [1], [2]], [4, 4, 4]) is None


def test_single_feature_value_does_not_split():
    assert best_split([[1], [1], [1]], [0, 1, 2]) is None


def test_tie_goes_to_lowest_dimension_then_threshold():
    X = [[0, 0], [1, 1], [2, 2], [3, 3]]
    s = best_split(X, [0, 0, 1, 1])
    assert s.dimension == 0
    # two symmetric splits with equal gain on one dimension: lowest threshold wins
    s = best_split([[0], [1], [2]], [0, 1, 0])
    assert s.threshold == 0.5


def test_min_leaf_samples_is_respected():
    s = best_split([[0], [1], [2], [3]], [0, 5, 5, 5], min_leaf_samples=2)
    assert s.threshold == 1.5


small_sets = st.integers(2, 9).flatmap(lambda n: st.tuples(
    arrays(np.int8, (n, 3), elements=st.integers(0, 4)),
    arrays(np.int8, n, elements=st.integers(-3, 3)),
))


@given(small_sets, st.integers(1, 3))
def test_best_split_matches_brute_force(data, min_leaf):
    X, y = data
    got = best_split(X, y, min_leaf)
    want = brute_best_split(X, y, min_leaf)
    if want is None:
        assert got is None or got.score < 1e-9
    else:
        assert got is not None
        assert got.score == pytest.approx(want[2], abs=1e-9)
        assert (got.dimension, got.threshold) == (want[0], want[1])


@pytest.mark.parametrize("targets,expected", [([2, 4], 3.0), ([5], 5.0), ([1, 2, 6], 3.0)])
def test_leaf_estimate(targets, expected):
    assert leaf_estimate(targets) == expected


def test_depth_zero_tree_is_a_mean():
    tree = train_tree([[0], [1], [2]], [1.0, 2.0, 6.0], max_depth=0)
    assert tree.node_count == 1
    assert tree.value[0] == 3.0


def test_depth_one_on_four_points():
    tree = train_tree([[0], [1], [2], [3]], [0, 0, 1, 1], max_depth=1)
    assert tree.threshold[0] == 1.5
    assert tree.value[tree.leaf_nodes].tolist() == [0.0, 1.0]


def test_step_function_is_fit_exactly():
    x = np.arange(16.0)[:, None]
    y = (x[:, 0] >= 5).astype(float) + 2 * (x[:, 0] >= 11)
    tree = train_tree(x, y, max_depth=4)
    np.testing.assert_array_equal(tree.predict(x), y)


def test_traverse_conventions():
    tree = perfect_tree(1)
    assert traverse(tree, [0.9]).node_ids == (0, 2)
    assert traverse(tree, [0.5]).node_ids == (0, 1)  # equality goes left
    single = train_tree([[0.0]], [1.0], max_depth=3)
    assert traverse(single, [7.0]).node_ids == (0,)


@given(arrays(np.float64, 3, elements=st.floats(0, 1)))
def test_traverse_matches_pointer_chasing(x):
    tree = perfect_tree(3)
    path = traverse(tree, x, tree_index=2, leaf_offset=10)
    assert list(path.node_ids) == walk(tree, x)
    assert path.leaf_index == 10 + tree.leaf_position[path.node_ids[-1]]


def test_path_nodes_repeat_early_leaves():
    tree = train_tree([[0.0], [1.0]], [0.0, 1.0], max_depth=3)
    paths = tree.path_nodes([[0.0], [1.0]])
    assert paths.shape == (2, 4)
    assert (paths[:, 1:] == paths[:, [1]]).all()


@pytest.mark.parametrize("per_tree,expected", [([1.0, 3.0], 2.0), ([4.5], 4.5), ([0, 0, 6], 2.0)])
def test_average_trees(per_tree, expected):
    assert average_trees(per_tree) == expected


def synthetic(m=120, d=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(m, d))
    return Dataset(X, np.sin(4 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=m))


def small_forest(trees=6, depth=3, seed=0, overlap=1.0):
    ds = synthetic(seed=seed)
    cfg = ForestConfig(trees, depth, overlap_ratio=overlap, seed=seed)
    return train_forest(ds, make_subsets(ds, trees, overlap, seed=seed), cfg), ds


def test_single_tree_forest_equals_tree():
    forest, ds = small_forest(trees=1)
    np.testing.assert_array_equal(forest.predict(ds.features), forest.trees[0].predict(ds.features))


def test_identical_subsets_give_identical_trees():
    ds = synthetic()
    a = train_tree(ds.features, ds.targets, 3, seed=5)
    b = train_tree(ds.features, ds.targets, 3, seed=5)
    assert a.to_nodes() == b.to_nodes()


def test_threads_do_not_change_the_forest():
    ds = synthetic()
    cfg = ForestConfig(5, 3, max_features=2, seed=4)
    plan = make_subsets(ds, 5, 1.0, seed=4)
    serial = train_forest(ds, plan, cfg)
    threaded = train_forest(ds, plan, cfg, n_jobs=4)
    assert [t.to_nodes() for t in serial.trees] == [t.to_nodes() for t in threaded.trees]


def test_forest_paths_carry_global_leaf_indices():
    forest, ds = small_forest()
    paths = forest_paths(forest, ds.features[0])
    expected = forest.leaf_offsets[:-1] + forest.leaves(ds.features[:1])[0]
    assert [p.leaf_index for p in paths] == expected.tolist()


def test_scalar_predict_matches_batch():
    forest, ds = small_forest()
    batch = forest.predict(ds.features[:20])
    assert [predict(forest, x) for x in ds.features[:20]] == batch.tolist()


def test_model_round_trip_is_bit_exact(tmp_path):
    forest, ds = small_forest(depth=4)
    save_model(forest, tmp_path / "m.json", {"note": 1})
    loaded, doc = load_model(tmp_path / "m.json")
    assert doc["note"] == 1
    assert loaded.config == forest.config
    np.testing.assert_array_equal(loaded.predict(ds.features), forest.predict(ds.features))


def test_model_version_is_checked():
    forest, _ = small_forest(trees=2)
    doc = forest.to_dict()
    doc["version"] = 99
    with pytest.raises(ValueError, match="version"):
        Forest.from_dict(doc)


def test_preorder_leaves_run_left_to_right():
    tree = perfect_tree(3)
    xs = [[(j + 0.5) / 8] for j in range(8)]
    assert tree.leaf_position[tree.apply(xs)].tolist() == list(range(8))
