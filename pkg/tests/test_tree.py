import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_screen.classifiers import LearnerSpec
from cascade_screen.classifiers.tree import TreeModel, best_split, build_tree, impurity, train_tree
from cascade_screen.errors import SpecValidationError, TrainingError

from oracles import brute_force_split


def test_impurity_examples():
    assert impurity("gini", 0, 5) == 0.0
    assert impurity("entropy", 5, 10) == 1.0
    assert impurity("gini", 1, 4) == pytest.approx(0.375, abs=1e-15)
    with pytest.raises(ValueError):
        impurity("gini", 3, 2)


def test_best_split_examples():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    assert best_split(X, np.array([1, 1, 1, 1]), [0], "gini", 1) is None
    f, thr, dec = best_split(X, np.array([0, 0, 1, 1]), [0], "gini", 1)
    assert (f, thr) == (0, 2.5) and dec == pytest.approx(0.5, abs=1e-15)


def test_tie_goes_to_lower_feature_then_lower_threshold():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    f, thr, _ = best_split(X, np.array([0, 0, 1, 1]), [1, 0], "gini", 1)
    assert (f, thr) == (0, 0.5)
    # symmetric thresholds on one feature: the lower wins
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    f, thr, _ = best_split(X, np.array([1, 0, 0, 1]), [0], "gini", 1)
    assert thr == 0.5


def test_min_leaf_makes_split_inadmissible():
    X = np.array([[1.0], [2.0], [3.0]])
    assert best_split(X, np.array([0, 1, 1]), [0], "gini", 2) is None


@given(st.integers(0, 2**32 - 1), st.sampled_from(["gini", "entropy"]))
def test_best_split_matches_oracle(seed, criterion):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 31))
    d = int(rng.integers(1, 5))
    X = rng.integers(0, 5, size=(n, d)).astype(float)
    y = rng.integers(0, 2, n)
    min_leaf = int(rng.integers(1, 4))
    got = best_split(X, y, range(d), criterion, min_leaf)
    want = brute_force_split(X, y, range(d), criterion, min_leaf)
    if want is None:
        assert got is None
    else:
        assert got[:2] == want[:2]
        assert abs(got[2] - want[2]) <= 1e-12


def test_separable_one_feature_depth_one():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = train_tree(X, y, LearnerSpec("TREE", {"min_samples_leaf": 1}))
    assert model.depth() == 1
    assert np.array_equal(model.predict(X), y)


def test_xor_needs_zero_gain_root_split():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    model = train_tree(X, y, LearnerSpec("TREE", {"min_samples_leaf": 1, "max_depth": 2}))
    assert np.array_equal(model.predict(X), y)


def test_domain_enforced():
    with pytest.raises(SpecValidationError):
        LearnerSpec("TREE", {"max_depth": 0})
    with pytest.raises(TrainingError):
        build_tree(np.zeros((0, 2)), np.zeros(0, dtype=int))


def _check_tree_invariants(model, X, y, max_depth, min_leaf):
    assert model.depth() <= max_depth
    leaves = model.apply(X)
    for leaf in np.unique(leaves):
        rows = leaves == leaf
        assert model.n_node[leaf] == rows.sum()
        assert model.value[leaf] == pytest.approx(y[rows].mean(), abs=1e-15)
        assert rows.sum() >= min_leaf
        c1 = y[rows].sum()
        assert model.label[leaf] == (1 if 2 * c1 > rows.sum() else 0)
    for i in np.flatnonzero(model.left >= 0):
        assert model.n_node[model.left[i]] + model.n_node[model.right[i]] == model.n_node[i]


@pytest.mark.parametrize("seed", range(8))
def test_tree_structure_invariants(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 4))
    y = (X[:, 0] + 0.5 * rng.normal(size=80) > 0).astype(int)
    depth = [2, 3, 5, 10, 50][seed % 5]
    leaf = [1, 5, 8, 10][seed % 4]
    model = train_tree(X, y, LearnerSpec("TREE", {"max_depth": depth, "min_samples_leaf": leaf,
                                                  "criterion": ["gini", "entropy"][seed % 2]}))
    _check_tree_invariants(model, X, y, depth, leaf)


def test_pure_leaves_predict_zero_or_one(rng):
    X = rng.normal(size=(40, 2))
    y = (X[:, 0] > 0).astype(int)
    model = train_tree(X, y, LearnerSpec("TREE", {"min_samples_leaf": 1}))
    assert set(np.unique(model.predict_proba(X))) <= {0.0, 1.0}


def test_tree_serialization_and_dimension_check(rng):
    X = rng.normal(size=(30, 3))
    y = (X[:, 1] > 0).astype(int)
    model = train_tree(X, y, LearnerSpec("TREE"))
    again = TreeModel.from_dict(model.to_dict())
    assert np.array_equal(again.predict_proba(X), model.predict_proba(X))
    with pytest.raises(ValueError):
        model.predict(X[:, :2])


def test_training_deterministic(rng):
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] > 0).astype(int)
    a = train_tree(X, y, LearnerSpec("TREE")).to_dict()
    b = train_tree(X, y, LearnerSpec("TREE")).to_dict()
    assert a == b
