"""Cascade ensembles: each stage's prediction becomes an input column of the next.

Two ways to produce the augmented training column are supported:

``OOF_SAFE``
    The column holds out-of-fold predictions from the stage's cross-validation,
    so no row is ever scored by a model trained on it. The deployed stage model
    is refit on all rows.
``PAPER_FAITHFUL``
    The stage's best cross-validation fold model is kept and its in-sample
    predictions over all rows become the column. This leaks labels (about
    nine tenths of the rows were in that model's training set) and is kept to
    measure the effect of that procedure.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import preprocess as pp
from ._seeding import mix_seed
from .classifiers.models import model_from_dict
from .classifiers.spec import Family, LearnerSpec
from .errors import SchemaError, SpecValidationError, TrainingError
from .selection import CVResult, cross_validate_arrays


class Augmentation(str, Enum):
    PROBA = "PROBA"
    LABEL = "LABEL"


class CascadeMode(str, Enum):
    OOF_SAFE = "OOF_SAFE"
    PAPER_FAITHFUL = "PAPER_FAITHFUL"


CASCADE_SHAPES = {
    "SVC_DT": (Family.SVC, Family.TREE),
    "SVC_DT_RF": (Family.SVC, Family.TREE, Family.FOREST),
}


@dataclass(frozen=True)
class CascadeSpec:
    """Ordered stage learners plus augmentation settings.

    ``base_features`` indexes the columns handed to :meth:`fit` (``None`` keeps
    them all). ``k`` is the per-stage cross-validation fold count.
    """

    stages: tuple
    augmentation: Augmentation = Augmentation.PROBA
    mode: CascadeMode = CascadeMode.OOF_SAFE
    base_features: Optional[tuple] = None
    k: int = 10
    skew_threshold: float = pp.DEFAULT_SKEW_THRESHOLD

    handles_preprocessing = True
    seed_consuming = True

    def __post_init__(self):
        stages = tuple(self.stages)
        if len(stages) < 2:
            raise SpecValidationError("a cascade needs at least 2 stages")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "augmentation", Augmentation(self.augmentation))
        object.__setattr__(self, "mode", CascadeMode(self.mode))
        if self.base_features is not None:
            feats = tuple(int(j) for j in self.base_features)
            if not feats:
                raise SpecValidationError("base_features must be nonempty")
            object.__setattr__(self, "base_features", feats)
        if int(self.k) < 2:
            raise SpecValidationError("cascade k must be >= 2")

    @classmethod
    def from_shape(cls, shape, params=None, options=None, **kwargs):
        """Build ``SVC_DT`` / ``SVC_DT_RF`` from per-family params and options."""
        params = params or {}
        options = options or {}
        stages = tuple(
            LearnerSpec(fam, params.get(fam, {}), options.get(fam, {}))
            for fam in CASCADE_SHAPES[shape]
        )
        return cls(stages, **kwargs)

    def label(self):
        return "_".join({"TREE": "DT", "FOREST": "RF"}.get(s.label(), s.label())
                        for s in self.stages)

    def fit(self, X, y, seed=0, binary_mask=None, feature_names=None):
        """Fit on raw columns; the cross-validation protocol for nested evaluation."""
        return fit_cascade_arrays(self, X, y, binary_mask, feature_names, seed=seed,
                                  assess=False)

    def to_dict(self):
        return {
            "stages": [s.to_dict() for s in self.stages],
            "augmentation": self.augmentation.value,
            "mode": self.mode.value,
            "base_features": None if self.base_features is None else list(self.base_features),
            "k": self.k,
            "skew_threshold": self.skew_threshold,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(LearnerSpec.from_dict(s) for s in d["stages"]), d["augmentation"],
                   d["mode"], d.get("base_features"), d.get("k", 10),
                   d.get("skew_threshold", pp.DEFAULT_SKEW_THRESHOLD))


@dataclass(frozen=True, eq=False)
class StageModel:
    spec: LearnerSpec
    preprocess: pp.PreprocessModel
    model: object
    input_dim: int
    source: str  # "refit" or "fold:<i>"

    def score(self, X):
        Z = self.preprocess.transform(X)
        return self.model.predict(Z), self.model.predict_proba(Z)


@dataclass(frozen=True, eq=False)
class StageFit:
    """Training-time bookkeeping for one stage (not part of the deployed model)."""

    cv: Optional[CVResult]
    augmented: Optional[np.ndarray]
    # For OOF_SAFE, the fold whose model produced each row's augmented value.
    provenance: Optional[np.ndarray]


@dataclass(frozen=True, eq=False)
class CascadeModel:
    stages: tuple
    augmentation: Augmentation
    mode: CascadeMode
    base_features: tuple
    base_names: tuple
    n_input: int
    fit_info: tuple = field(default=(), repr=False)

    family = "CASCADE"

    @property
    def n_features(self):
        return len(self.base_features)

    @property
    def final_cv(self) -> Optional[CVResult]:
        """Cross-validation of the last stage on its augmented input, if assessed."""
        return self.fit_info[-1].cv if self.fit_info else None

    def _trace(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} base features, got {X.shape[1]}")
        cur = X
        out = None
        for i, stage in enumerate(self.stages):
            labels, proba = stage.score(cur)
            out = labels, proba
            if i < len(self.stages) - 1:
                col = proba if self.augmentation is Augmentation.PROBA else labels
                cur = np.column_stack([cur, np.asarray(col, dtype=np.float64)])
        return out

    def predict(self, X):
        return np.asarray(self._trace(X)[0], dtype=np.int64)

    def predict_proba(self, X):
        return np.asarray(self._trace(X)[1], dtype=np.float64)

    def to_dict(self):
        return {
            "family": "CASCADE",
            "augmentation": self.augmentation.value,
            "mode": self.mode.value,
            "base_features": list(self.base_features),
            "base_names": list(self.base_names),
            "n_input": self.n_input,
            "stages": [
                {"spec": s.spec.to_dict(), "preprocess": s.preprocess.to_dict(),
                 "model": s.model.to_dict(), "input_dim": s.input_dim, "source": s.source}
                for s in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, d):
        stages = tuple(
            StageModel(LearnerSpec.from_dict(s["spec"]), pp.PreprocessModel.from_dict(s["preprocess"]),
                       model_from_dict(s["model"]), int(s["input_dim"]), s["source"])
            for s in d["stages"]
        )
        return cls(stages, Augmentation(d["augmentation"]), CascadeMode(d["mode"]),
                   tuple(d["base_features"]), tuple(d["base_names"]), int(d["n_input"]))


def _augmented_names(names, i):
    return (*names, f"stage{i}_output")


def fit_cascade_arrays(spec: CascadeSpec, X, y, binary_mask=None, feature_names=None,
                       seed=0, assess=True) -> CascadeModel:
    """Fit a cascade on a raw matrix; see :func:`fit_cascade`."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d_all = X.shape[1]
    base = spec.base_features if spec.base_features is not None else tuple(range(d_all))
    if max(base) >= d_all or min(base) < 0:
        raise SchemaError(f"base feature index out of range for {d_all} columns")
    mask_all = tuple(binary_mask) if binary_mask is not None else (False,) * d_all
    names_all = tuple(feature_names) if feature_names is not None else \
        tuple(f"x{j}" for j in range(d_all))
    cur = X[:, list(base)]
    mask = tuple(mask_all[j] for j in base)
    names = tuple(names_all[j] for j in base)
    aug_is_binary = spec.augmentation is Augmentation.LABEL
    last = len(spec.stages) - 1

    stages, infos = [], []
    for i, stage_spec in enumerate(spec.stages):
        stage_seed = mix_seed(seed, i)
        need_cv = i < last or assess or spec.mode is CascadeMode.PAPER_FAITHFUL
        try:
            cv = None
            if need_cv:
                # Folds depend only on (y, k, seed): every stage shares them.
                cv = cross_validate_arrays(stage_spec, cur, y, mask, names, spec.k, seed,
                                           skew_threshold=spec.skew_threshold)
            if spec.mode is CascadeMode.OOF_SAFE:
                prep = pp.fit(cur, names, mask, spec.skew_threshold)
                model = stage_spec.fit(prep.transform(cur), y, seed=stage_seed)
                deployed = StageModel(stage_spec, prep, model, cur.shape[1], "refit")
            else:
                f = cv.best_fold()
                fold = cv.folds[f]
                deployed = StageModel(stage_spec, fold.preprocess, fold.model, cur.shape[1],
                                      f"fold:{f}")
        except TrainingError as exc:
            raise TrainingError(str(exc), fold=exc.fold, stage=i, epoch=exc.epoch) from exc
        stages.append(deployed)

        if i == last:
            infos.append(StageFit(cv, None, None))
            break
        if spec.mode is CascadeMode.OOF_SAFE:
            col = cv.oof_proba if spec.augmentation is Augmentation.PROBA else cv.oof_label
            provenance = cv.oof_fold.copy()
        else:
            labels, proba = deployed.score(cur)
            col = proba if spec.augmentation is Augmentation.PROBA else labels
            provenance = None
        col = np.asarray(col, dtype=np.float64)
        infos.append(StageFit(cv, col, provenance))
        cur = np.column_stack([cur, col])
        mask = (*mask, aug_is_binary)
        names = _augmented_names(names, i)

    return CascadeModel(tuple(stages), spec.augmentation, spec.mode, tuple(base),
                        tuple(names_all[j] for j in base), d_all, tuple(infos))


def fit_cascade(spec: CascadeSpec, ds, k=None, seed=0, assess=True) -> CascadeModel:
    """Train every stage in order on ``ds``.

    Stage ``i`` sees the base features plus the ``i`` augmented columns of
    the earlier stages. With ``assess=True`` the last stage is also
    cross-validated on its augmented input; that result (``final_cv``) is the
    cascade's apparent CV performance. ``k`` overrides ``spec.k``.

    Raises:
        TrainingError: tagged with the stage (and fold) that failed.
    """
    if k is not None and int(k) != spec.k:
        spec = CascadeSpec(spec.stages, spec.augmentation, spec.mode, spec.base_features,
                           int(k), spec.skew_threshold)
    return fit_cascade_arrays(spec, ds.X, ds.y, ds.binary_mask, ds.feature_names,
                              seed=seed, assess=assess)


def predict_cascade(model: CascadeModel, x):
    """``(label, probability)`` for one feature vector (or a FeatureVector).

    ``x`` may hold just the base features or the full column set the cascade
    was fitted on, in which case the base columns are picked out.
    """
    values = getattr(x, "values", x)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise SchemaError("predict_cascade expects a single feature vector")
    if values.size == model.n_input and values.size != model.n_features:
        values = values[list(model.base_features)]
    labels, proba = model._trace(values[None, :])
    return int(labels[0]), float(proba[0])
