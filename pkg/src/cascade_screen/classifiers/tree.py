"""CART classification tree grown by exhaustive midpoint split search."""

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import TrainingError

CRITERIA = {"gini": 0, "entropy": 1}


def impurity(criterion, class1_count, total):
    """Node impurity from the class-1 count.

    gini = 2p(1-p); entropy = -p log2 p - (1-p) log2(1-p) with 0 log 0 = 0.
    """
    if not 0 <= class1_count <= total or total < 1:
        raise ValueError(f"need 0 <= class1_count <= total and total >= 1, got {class1_count}/{total}")
    return _kernels.python_backend.impurity(CRITERIA[criterion], int(class1_count), int(total))


def best_split(X, y, candidate_features, criterion, min_leaf, rows=None):
    """Best admissible split of a node.

    Thresholds are midpoints between consecutive distinct values. The split
    maximizing parent impurity minus the size-weighted child impurities
    wins, subject to both children holding at least ``min_leaf`` rows. Ties
    (within 1e-12) go to the lower feature index, then the lower threshold.

    Returns:
        ``(feature, threshold, decrease)`` or ``None`` when the node is pure
        or nothing is admissible.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if rows is None:
        rows = np.arange(X.shape[0], dtype=np.int64)
    features = np.ascontiguousarray(sorted(int(f) for f in candidate_features), dtype=np.int64)
    return _kernels.best_split(
        X, y, np.ascontiguousarray(rows, dtype=np.int64), features,
        CRITERIA[criterion], int(min_leaf),
    )


def n_candidate_features(rule, d):
    if rule in (None, "all"):
        return d
    if rule == "sqrt":
        k = math.ceil(math.sqrt(d))
    elif rule == "log2":
        k = math.ceil(math.log2(d)) if d > 1 else 1
    else:
        raise ValueError(f"unknown max-feature rule {rule!r}")
    return max(1, min(d, k))


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Array-encoded binary tree. ``left[i] == -1`` marks a leaf.

    ``value`` holds each node's class-1 fraction over the training rows that
    reached it; ``label`` the majority class (ties to 0).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray
    label: np.ndarray
    n_features: int
    params: dict

    family = "TREE"

    @property
    def n_nodes(self):
        return int(self.left.size)

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def is_leaf(self):
        return self.left < 0

    def _check(self, X):
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def apply(self, X):
        X = self._check(X)
        return _kernels.tree_apply(X, self.feature, self.threshold, self.left, self.right)

    def predict_proba(self, X):
        return self.value[self.apply(X)].astype(np.float64)

    def predict(self, X):
        return self.label[self.apply(X)].astype(np.int64)

    def to_dict(self):
        return {
            "family": "TREE",
            "params": dict(self.params),
            "n_features": self.n_features,
            "nodes": {
                "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": self.value.tolist(),
                "n_node": self.n_node.tolist(),
                "label": self.label.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d):
        nodes = d["nodes"]
        return cls(
            feature=np.asarray(nodes["feature"], dtype=np.int64),
            threshold=np.asarray(nodes["threshold"], dtype=np.float64),
            left=np.asarray(nodes["left"], dtype=np.int64),
            right=np.asarray(nodes["right"], dtype=np.int64),
            value=np.asarray(nodes["value"], dtype=np.float64),
            n_node=np.asarray(nodes["n_node"], dtype=np.int64),
            label=np.asarray(nodes["label"], dtype=np.int64),
            n_features=int(d["n_features"]),
            params=dict(d.get("params", {})),
        )


def build_tree(X, y, criterion="gini", max_depth=50, min_samples_leaf=1,
               min_samples_split=2, max_features=None, rng=None, params=None):
    """Grow a tree depth-first (left child first).

    ``max_features`` of ``None``/``"all"`` searches every feature at every
    node; ``"sqrt"``/``"log2"`` samples that many candidates per node from
    ``rng`` without replacement.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("cannot train a tree on an empty training set")
    n, d = X.shape
    k = n_candidate_features(max_features, d)
    if k < d and rng is None:
        raise ValueError("feature subsampling needs an rng")
    all_features = np.arange(d, dtype=np.int64)
    crit = CRITERIA[criterion]

    feature, threshold, left, right = [], [], [], []
    value, n_node, label = [], [], []

    def new_node(rows):
        c1 = int(y[rows].sum())
        m = rows.size
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(c1 / m)
        n_node.append(m)
        label.append(1 if 2 * c1 > m else 0)
        return len(feature) - 1

    root_rows = np.arange(n, dtype=np.int64)
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        m = rows.size
        pure = value[node] == 0.0 or value[node] == 1.0
        if depth >= max_depth or m < min_samples_split or pure:
            continue
        if k < d:
            cand = np.sort(rng.choice(d, size=k, replace=False)).astype(np.int64)
        else:
            cand = all_features
        split = _kernels.best_split(X, y, rows, cand, crit, int(min_samples_leaf))
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[rows, f] <= thr
        lrows = rows[go_left]
        rrows = rows[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # pushed right-then-left so the left subtree is expanded first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))

    return TreeModel(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        n_node=np.asarray(n_node, dtype=np.int64),
        label=np.asarray(label, dtype=np.int64),
        n_features=d,
        params=dict(params or {}),
    )


def train_tree(X, y, spec):
    """Standalone tree: every feature is a split candidate at every node."""
    p = spec.params
    return build_tree(
        X, y, p["criterion"], p["max_depth"], p["min_samples_leaf"],
        p["min_samples_split"], max_features=None, params=p,
    )
