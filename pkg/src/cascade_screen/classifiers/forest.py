"""Bagged random forest of CART trees with per-node feature subsampling."""

from dataclasses import dataclass

import numpy as np

from .._seeding import mix_seed
from ..errors import TrainingError
from .tree import TreeModel, build_tree


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    tree_seeds: tuple
    max_features: str
    n_features: int
    params: dict

    family = "FOREST"

    def _check(self, X):
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def member_probas(self, X):
        X = self._check(X)
        return np.stack([t.predict_proba(X) for t in self.trees])

    def predict_proba(self, X):
        return self.member_probas(X).mean(axis=0)

    def predict(self, X):
        X = self._check(X)
        votes = np.stack([t.predict(X) for t in self.trees]).sum(axis=0)
        return (2 * votes > len(self.trees)).astype(np.int64)

    def to_dict(self):
        return {
            "family": "FOREST",
            "params": dict(self.params),
            "n_features": self.n_features,
            "max_features": self.max_features,
            "tree_seeds": [int(s) for s in self.tree_seeds],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            trees=tuple(TreeModel.from_dict(t) for t in d["trees"]),
            tree_seeds=tuple(int(s) for s in d["tree_seeds"]),
            max_features=d["max_features"],
            n_features=int(d["n_features"]),
            params=dict(d.get("params", {})),
        )


def train_forest(X, y, spec, seed=0):
    """Train ``n_trees`` trees, tree ``t`` driven by a generator seeded ``mix(seed, t)``.

    That generator draws the bootstrap sample (size n, with replacement) and
    then every per-node candidate-feature subset for the tree, so trees are
    independent of training order. ``bootstrap=False`` and
    ``max_features_override="all"`` are test hooks that make the forest
    degenerate to plain trees.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("cannot train a forest on an empty training set")
    p = spec.params
    opts = spec.options
    n = X.shape[0]
    rule = opts.get("max_features_override") or p["max_features"]
    trees, seeds = [], []
    for t in range(int(opts["n_trees"])):
        tree_seed = mix_seed(seed, t)
        rng = np.random.default_rng(tree_seed)
        if opts["bootstrap"]:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        trees.append(
            build_tree(Xb, yb, p["criterion"], p["max_depth"], p["min_samples_leaf"],
                       p["min_samples_split"], max_features=rule, rng=rng, params=p)
        )
        seeds.append(tree_seed)
    return ForestModel(tuple(trees), tuple(seeds), rule, X.shape[1], dict(p))
