"""Uniform train / load entry points over the four learner families."""

import numpy as np

from .forest import ForestModel, train_forest
from .mlp import MlpModel, train_mlp
from .spec import Family, LearnerSpec
from .svc import SvcModel, train_svc
from .tree import TreeModel, train_tree


def train(spec: LearnerSpec, X, y, seed=0):
    """Fit ``spec`` on ``(X, y)``. ``seed`` only matters for MLP and FOREST."""
    if spec.family is Family.TREE:
        return train_tree(X, y, spec)
    if spec.family is Family.FOREST:
        return train_forest(X, y, spec, seed)
    if spec.family is Family.SVC:
        return train_svc(X, y, spec)
    if spec.family is Family.MLP:
        return train_mlp(X, y, spec, seed)
    raise ValueError(f"unknown family {spec.family!r}")


class MajorityModel:
    """Predicts the training majority class (ties to 1, matching the 0.5 rule)."""

    family = "MAJORITY"

    def __init__(self, proba, n_features):
        self.proba = float(proba)
        self.n_features = int(n_features)

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.full(X.shape[0], self.proba)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self):
        return {"family": "MAJORITY", "proba": self.proba, "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d):
        return cls(d["proba"], d["n_features"])


class MajoritySpec:
    """Constant-majority baseline with the same ``fit`` protocol as :class:`LearnerSpec`."""

    handles_preprocessing = False
    seed_consuming = False

    def fit(self, X, y, seed=0):
        y = np.asarray(y)
        return MajorityModel(float(y.mean()), np.asarray(X).shape[1])

    def to_dict(self):
        return {"family": "MAJORITY"}

    def label(self):
        return "MAJORITY"


_LOADERS = {
    "TREE": TreeModel.from_dict,
    "FOREST": ForestModel.from_dict,
    "SVC": SvcModel.from_dict,
    "MLP": MlpModel.from_dict,
    "MAJORITY": MajorityModel.from_dict,
}


def model_from_dict(d):
    try:
        loader = _LOADERS[d["family"]]
    except KeyError:
        raise ValueError(f"unknown model family {d.get('family')!r}") from None
    return loader(d)


def predict(model, x):
    """Label(s) for a single row or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = model.predict(np.atleast_2d(x))
    return int(out[0]) if x.ndim == 1 else out


def predict_proba(model, x):
    x = np.asarray(x, dtype=np.float64)
    out = model.predict_proba(np.atleast_2d(x))
    return float(out[0]) if x.ndim == 1 else out
