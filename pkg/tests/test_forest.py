import numpy as np
import pytest

from cascade_screen.classifiers import LearnerSpec
from cascade_screen.classifiers.forest import ForestModel, train_forest
from cascade_screen.classifiers.tree import n_candidate_features, train_tree


def _data(rng, n=80):
    X = rng.normal(size=(n, 5))
    y = ((X[:, 0] + X[:, 1] * X[:, 2]) > 0).astype(int)
    return X, y


def test_candidate_feature_counts():
    assert n_candidate_features("sqrt", 17) == 5
    assert n_candidate_features("log2", 17) == 5
    assert n_candidate_features("sqrt", 19) == 5
    assert n_candidate_features("log2", 8) == 3
    assert n_candidate_features("all", 4) == 4


def test_degenerate_forest_equals_tree(rng):
    X, y = _data(rng)
    params = {"criterion": "gini", "max_depth": 10, "min_samples_leaf": 1, "min_samples_split": 2}
    opts = {"n_trees": 1, "bootstrap": False, "max_features_override": "all"}
    forest = train_forest(X, y, LearnerSpec("FOREST", params, opts), seed=4)
    tree = train_tree(X, y, LearnerSpec("TREE", params))
    Xt = rng.normal(size=(50, 5))
    assert np.array_equal(forest.predict(Xt), tree.predict(Xt))
    assert np.array_equal(forest.predict_proba(Xt), tree.predict_proba(Xt))


def test_identical_trees_vote_like_one(rng):
    X, y = _data(rng)
    params = {"criterion": "entropy", "max_depth": 5, "min_samples_leaf": 1, "min_samples_split": 2}
    opts = {"n_trees": 7, "bootstrap": False, "max_features_override": "all"}
    forest = train_forest(X, y, LearnerSpec("FOREST", params, opts), seed=0)
    tree = train_tree(X, y, LearnerSpec("TREE", params))
    assert np.array_equal(forest.predict(X), tree.predict(X))


def test_same_seed_same_model(rng):
    X, y = _data(rng)
    spec = LearnerSpec("FOREST", {}, {"n_trees": 10})
    assert train_forest(X, y, spec, 3).to_dict() == train_forest(X, y, spec, 3).to_dict()
    assert train_forest(X, y, spec, 3).to_dict() != train_forest(X, y, spec, 4).to_dict()


def test_default_tree_count(rng):
    X, y = _data(rng, 60)
    assert len(train_forest(X, y, LearnerSpec("FOREST"), 0).trees) == 100


def test_proba_is_mean_of_member_fractions(rng):
    X, y = _data(rng)
    forest = train_forest(X, y, LearnerSpec("FOREST", {"max_depth": 5, "min_samples_split": 2},
                                            {"n_trees": 15}), 1)
    Xt = rng.normal(size=(10, 5))
    p = forest.predict_proba(Xt)
    manual = np.mean([t.value[t.apply(Xt)] for t in forest.trees], axis=0)
    assert np.allclose(p, manual, atol=1e-15)
    assert np.all((0 <= p) & (p <= 1))
    votes = np.sum([t.predict(Xt) for t in forest.trees], axis=0)
    assert np.array_equal(forest.predict(Xt), (2 * votes > 15).astype(int))


def test_tree_order_independent_of_training_order(rng):
    X, y = _data(rng)
    spec = LearnerSpec("FOREST", {"min_samples_split": 2}, {"n_trees": 6})
    big = train_forest(X, y, spec, 9)
    small = train_forest(X, y, LearnerSpec("FOREST", {"min_samples_split": 2}, {"n_trees": 3}), 9)
    for a, b in zip(big.trees[:3], small.trees):
        assert a.to_dict() == b.to_dict()


def test_round_trip(rng):
    X, y = _data(rng)
    forest = train_forest(X, y, LearnerSpec("FOREST", {}, {"n_trees": 5}), 2)
    again = ForestModel.from_dict(forest.to_dict())
    assert np.array_equal(again.predict_proba(X), forest.predict_proba(X))
    with pytest.raises(ValueError):
        forest.predict(X[:, :3])
