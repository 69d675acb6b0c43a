"""Learner specifications: hyperparameter domains, defaults and validation."""

from dataclasses import dataclass, field
from enum import Enum

from ..errors import SpecValidationError


class Family(str, Enum):
    SVC = "SVC"
    MLP = "MLP"
    TREE = "TREE"
    FOREST = "FOREST"


_TREE_GRID = {
    "criterion": ("gini", "entropy"),
    "max_depth": (2, 3, 5, 10, 50),
    "max_features": ("sqrt", "log2"),
    "min_samples_leaf": (1, 5, 8, 10),
    "min_samples_split": (2, 3, 50, 100),
}

# Insertion order is the grid enumeration order (last key varies fastest).
GRIDS = {
    Family.SVC: {
        "kernel": ("linear", "poly", "rbf", "sigmoid"),
        "gamma": ("scale", "auto"),
        "C": (0.5, 1.0, 2.0),
        "degree": (2, 3, 4),
        "probability": (True,),
    },
    Family.MLP: {
        "hidden_width": (32, 64, 128),
        "n_hidden_layers": (2, 3, 4),
        "activation": ("relu", "tanh"),
        "solver": ("sgd", "adam"),
        "alpha": (1e-4, 3e-4, 0.05),
        "learning_rate": ("constant", "adaptive"),
    },
    Family.TREE: dict(_TREE_GRID),
    Family.FOREST: dict(_TREE_GRID),
}

DEFAULT_PARAMS = {
    Family.SVC: {"kernel": "rbf", "gamma": "scale", "C": 2.0, "degree": 2, "probability": True},
    Family.MLP: {
        "hidden_width": 64,
        "n_hidden_layers": 3,
        "activation": "relu",
        "solver": "sgd",
        "alpha": 3e-4,
        "learning_rate": "adaptive",
    },
    Family.TREE: {
        "criterion": "gini",
        "max_depth": 50,
        "max_features": "sqrt",
        "min_samples_leaf": 5,
        "min_samples_split": 2,
    },
    Family.FOREST: {
        "criterion": "entropy",
        "max_depth": 2,
        "max_features": "sqrt",
        "min_samples_leaf": 8,
        "min_samples_split": 50,
    },
}

# Training knobs outside the hyperparameter grid. ``None`` means "derive".
DEFAULT_OPTIONS = {
    Family.SVC: {
        "tol": 1e-3,
        "max_iter": None,
        "calibration_fraction": 0.2,
        "calibration_seed": 0,
    },
    Family.MLP: {
        "max_epochs": 500,
        "batch_size": 32,
        "sgd_lr": 0.01,
        "adam_lr": 0.001,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "adaptive_patience": 10,
        "adaptive_tol": 1e-4,
        "stop_tol": 1e-6,
    },
    Family.TREE: {},
    Family.FOREST: {"n_trees": 100, "bootstrap": True, "max_features_override": None},
}

SEED_CONSUMING = frozenset({Family.MLP, Family.FOREST})


def _same(a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return float(a) == float(b)
    return a == b


def _canonical(family, name, value):
    for allowed in GRIDS[family][name]:
        if _same(value, allowed):
            return allowed
    raise SpecValidationError(
        f"{family.value}.{name}={value!r} is outside its domain {GRIDS[family][name]}"
    )


@dataclass(frozen=True)
class LearnerSpec:
    """A learner family plus hyperparameters and training options.

    Missing hyperparameters take the defaults above; every supplied value must
    lie in the family's grid domain.
    """

    family: Family
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        params = dict(DEFAULT_PARAMS[family])
        for name, value in dict(self.params).items():
            if name not in GRIDS[family]:
                raise SpecValidationError(f"unknown {family.value} hyperparameter {name!r}")
            params[name] = _canonical(family, name, value)
        object.__setattr__(self, "params", params)
        options = dict(DEFAULT_OPTIONS[family])
        for name, value in dict(self.options).items():
            if name not in options:
                raise SpecValidationError(f"unknown {family.value} option {name!r}")
            options[name] = value
        object.__setattr__(self, "options", options)

    @property
    def seed_consuming(self):
        return self.family in SEED_CONSUMING

    handles_preprocessing = False

    def fit(self, X, y, seed=0):
        from .models import train

        return train(self, X, y, seed)

    def with_params(self, **params):
        return LearnerSpec(self.family, {**self.params, **params}, self.options)

    def to_dict(self):
        return {"family": self.family.value, "params": dict(self.params),
                "options": dict(self.options)}

    @classmethod
    def from_dict(cls, d):
        return cls(Family(d["family"]), d.get("params", {}), d.get("options", {}))

    def label(self):
        return self.family.value


def grid_points(family):
    """All Cartesian grid points of ``family`` in enumeration order."""
    import itertools

    grid = GRIDS[Family(family)]
    names = list(grid)
    return [dict(zip(names, values)) for values in itertools.product(*grid.values())]
