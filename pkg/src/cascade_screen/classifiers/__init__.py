"""From-scratch base learners behind one train / predict interface."""

from .forest import ForestModel, train_forest
from .mlp import MlpModel, Network, fit_mlp, train_mlp
from .models import MajorityModel, MajoritySpec, model_from_dict, predict, predict_proba, train
from .spec import (
    DEFAULT_OPTIONS,
    DEFAULT_PARAMS,
    GRIDS,
    Family,
    LearnerSpec,
    grid_points,
)
from .svc import SvcModel, fit_svc, kernel, kernel_matrix, resolve_gamma, train_svc
from .tree import TreeModel, best_split, build_tree, impurity, train_tree

__all__ = [
    "DEFAULT_OPTIONS", "DEFAULT_PARAMS", "GRIDS", "Family", "ForestModel", "LearnerSpec",
    "MajorityModel", "MajoritySpec", "MlpModel", "Network", "SvcModel", "TreeModel",
    "best_split", "build_tree", "fit_mlp", "fit_svc", "grid_points", "impurity", "kernel",
    "kernel_matrix", "model_from_dict", "predict", "predict_proba", "resolve_gamma", "train",
    "train_forest", "train_mlp", "train_svc", "train_tree",
]
