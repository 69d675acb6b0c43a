"""Cross-validation, exhaustive grid search and sequential forward selection.

Everything here is driven by an *estimator spec*: any object with
``fit(X, y, seed) -> model`` where ``model`` has ``predict`` and
``predict_proba`` over matrices. :class:`~cascade_screen.classifiers.LearnerSpec`
is the usual one; estimators that set ``handles_preprocessing = True``
(cascades) receive raw columns plus ``binary_mask``/``feature_names`` and
do their own preprocessing.
"""

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import preprocess as pp
from ._seeding import mix_seed
from .classifiers.spec import GRIDS, Family, LearnerSpec
from .dataset import Dataset, FoldAssignment, stratified_kfold
from .errors import CascadeScreenError, GridSearchError, TrainingError
from .metrics import (
    METRIC_NAMES,
    ConfusionMatrix,
    MetricTriple,
    confusion,
    max_skipping_none,
    mean_skipping_none,
)

JOBS_ENV = "CASCADE_SCREEN_JOBS"


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1") or 1)
    return max(1, int(jobs))


def parallel_map(fn, items, jobs=1):
    """``list(map(fn, items))``, optionally in worker processes; order is preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class FoldResult:
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    train_cm: ConfusionMatrix
    test_cm: ConfusionMatrix
    train_metrics: MetricTriple
    test_metrics: MetricTriple
    preprocess: Optional[pp.PreprocessModel]
    model: object = None


@dataclass
class CVResult:
    """Per-fold and aggregate results of one cross-validation run.

    ``mean_*`` are arithmetic fold means (undefined fold metrics skipped and
    counted in ``skipped``); ``best_*`` are per-metric maxima over folds.
    ``oof_*`` hold, for every row, the prediction of the fold model that
    held that row out.
    """

    folds: list
    assignment: FoldAssignment
    features: tuple
    oof_label: np.ndarray
    oof_proba: np.ndarray
    oof_fold: np.ndarray
    mean_train: dict = field(default_factory=dict)
    mean_test: dict = field(default_factory=dict)
    best_train: dict = field(default_factory=dict)
    best_test: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.assignment.k

    @property
    def mean_test_accuracy(self):
        return self.mean_test["accuracy"]

    def best_fold(self):
        """Index of the fold with the highest test accuracy (earliest on ties)."""
        accs = [f.test_metrics.accuracy for f in self.folds]
        return int(np.argmax(accs))

    def summary(self):
        return {
            "mean_train": dict(self.mean_train),
            "mean_test": dict(self.mean_test),
            "best_train": dict(self.best_train),
            "best_test": dict(self.best_test),
            "skipped": dict(self.skipped),
        }

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.assignment.seed,
            "features": list(self.features),
            **self.summary(),
            "folds": [
                {
                    "fold": f.fold,
                    "n_train": int(f.train_index.size),
                    "n_test": int(f.test_index.size),
                    "train_confusion": f.train_cm.to_dict(),
                    "test_confusion": f.test_cm.to_dict(),
                    "train": f.train_metrics.as_dict(),
                    "test": f.test_metrics.as_dict(),
                }
                for f in self.folds
            ],
        }


def _aggregate(folds):
    out = {"mean_train": {}, "mean_test": {}, "best_train": {}, "best_test": {}, "skipped": {}}
    for part in ("train", "test"):
        for name in METRIC_NAMES:
            values = [getattr(getattr(f, f"{part}_metrics"), name) for f in folds]
            mean, skipped = mean_skipping_none(values)
            out[f"mean_{part}"][name] = mean
            out[f"best_{part}"][name] = max_skipping_none(values)
            out["skipped"][f"{part}_{name}"] = skipped
    return out


@dataclass
class _FoldTask:
    estimator: object
    X: np.ndarray
    y: np.ndarray
    binary_mask: tuple
    feature_names: tuple
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    seed: int
    preprocess_global: Optional[pp.PreprocessModel]
    skew_threshold: float
    accuracy_formula: str
    keep_model: bool


def _run_fold(task: _FoldTask):
    X, y = task.X, task.y
    tr, te = task.train_index, task.test_index
    est = task.estimator
    fold_seed = mix_seed(task.seed, task.fold)
    try:
        if getattr(est, "handles_preprocessing", False):
            prep = None
            Xtr, Xte = X[tr], X[te]
            model = est.fit(Xtr, y[tr], seed=fold_seed, binary_mask=task.binary_mask,
                            feature_names=task.feature_names)
        else:
            prep = task.preprocess_global or pp.fit(
                X[tr], task.feature_names, task.binary_mask, task.skew_threshold)
            Xtr, Xte = prep.transform(X[tr]), prep.transform(X[te])
            model = est.fit(Xtr, y[tr], seed=fold_seed)
        train_pred = model.predict(Xtr)
        test_pred = model.predict(Xte)
        test_proba = model.predict_proba(Xte)
    except TrainingError as exc:
        raise TrainingError(str(exc), fold=task.fold,
                            stage=exc.stage if exc.fold is None else None) from exc
    except (CascadeScreenError, ValueError, ArithmeticError) as exc:
        raise TrainingError(f"{type(exc).__name__}: {exc}", fold=task.fold) from exc
    train_cm = confusion(y[tr], train_pred)
    test_cm = confusion(y[te], test_pred)
    return FoldResult(
        fold=task.fold, train_index=tr, test_index=te,
        train_cm=train_cm, test_cm=test_cm,
        train_metrics=MetricTriple.from_confusion(train_cm, task.accuracy_formula),
        test_metrics=MetricTriple.from_confusion(test_cm, task.accuracy_formula),
        preprocess=prep, model=model if task.keep_model else None,
    ), np.asarray(test_pred, dtype=np.int64), np.asarray(test_proba, dtype=np.float64)


def cross_validate_arrays(estimator, X, y, binary_mask=None, feature_names=None, k=10,
                          seed=0, *, stratify=True, skew_threshold=pp.DEFAULT_SKEW_THRESHOLD,
                          global_preprocess=False, accuracy_formula="standard",
                          keep_models=True, jobs=1, assignment=None):
    """Cross-validate ``estimator`` on a raw matrix; see :func:`cross_validate`."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d = X.shape[1]
    binary_mask = tuple(binary_mask) if binary_mask is not None else (False,) * d
    feature_names = tuple(feature_names) if feature_names is not None else \
        tuple(f"x{j}" for j in range(d))
    if assignment is None:
        assignment = stratified_kfold(y, k, seed, stratify=stratify)
    glob = None
    if global_preprocess and not getattr(estimator, "handles_preprocessing", False):
        glob = pp.fit(X, feature_names, binary_mask, skew_threshold)
    tasks = [
        _FoldTask(estimator, X, y, binary_mask, feature_names, fold, tr, te, seed, glob,
                  skew_threshold, accuracy_formula, keep_models)
        for fold, (tr, te) in enumerate(assignment.splits())
    ]
    outputs = parallel_map(_run_fold, tasks, resolve_jobs(jobs))
    n = y.size
    oof_label = np.full(n, -1, dtype=np.int64)
    oof_proba = np.full(n, np.nan)
    oof_fold = np.full(n, -1, dtype=np.int64)
    folds = []
    for result, labels, proba in outputs:
        oof_label[result.test_index] = labels
        oof_proba[result.test_index] = proba
        oof_fold[result.test_index] = result.fold
        folds.append(result)
    agg = _aggregate(folds)
    return CVResult(folds, assignment, tuple(range(d)), oof_label, oof_proba, oof_fold, **agg)


def cross_validate(spec, ds: Dataset, features=None, k=10, seed=0, **kwargs) -> CVResult:
    """Stratified k-fold cross-validation of ``spec`` restricted to ``features``.

    For each fold the preprocessing plan is fitted on the training rows only
    (unless ``global_preprocess=True``), both partitions are transformed, the
    learner is trained with seed ``mix(seed, fold)`` and train/test confusion
    matrices plus out-of-fold predictions are recorded. Folds are a pure
    function of ``(labels, k, seed)``, so every call with the same seed sees
    the same partition.

    Raises:
        TrainingError: tagged with the failing fold index.
    """
    features = tuple(range(len(ds.feature_names))) if features is None else \
        tuple(int(f) for f in features)
    if not features:
        raise ValueError("features must be nonempty")
    cols = list(features)
    result = cross_validate_arrays(
        spec, ds.X[:, cols], ds.y,
        binary_mask=[ds.binary_mask[j] for j in cols],
        feature_names=[ds.feature_names[j] for j in cols],
        k=k, seed=seed, **kwargs,
    )
    result.features = features
    return result


@dataclass
class GridPoint:
    index: int
    params: dict
    cv: Optional[CVResult] = None
    error: Optional[str] = None

    @property
    def score(self):
        return None if self.cv is None else self.cv.mean_test["accuracy"]


@dataclass
class GridSearchResult:
    points: list
    best_index: int
    tied_with_best: list

    @property
    def best(self):
        return self.points[self.best_index]

    @property
    def best_params(self):
        return dict(self.best.params)

    def to_dict(self):
        return {
            "best_index": self.best_index,
            "best_params": self.best_params,
            "tie_break": {"rule": "earliest enumeration order", "tied": list(self.tied_with_best)},
            "points": [
                {"index": p.index, "params": p.params, "error": p.error,
                 "mean_test_accuracy": p.score,
                 "summary": None if p.cv is None else p.cv.summary()}
                for p in self.points
            ],
        }


def enumerate_grid(grid):
    names = list(grid)
    return [dict(zip(names, values)) for values in itertools.product(*grid.values())]


def grid_search(family, ds, features=None, k=10, seed=0, *, grid=None, make_spec=None,
                options=None, jobs=1, **cv_kwargs) -> GridSearchResult:
    """Evaluate every point of the hyperparameter grid by cross-validation.

    The grid defaults to the family's full domain, enumerated in declaration
    order with the last hyperparameter varying fastest. All points share
    ``seed`` and hence the same folds. The best point has the highest mean
    test accuracy; ties go to the earliest point. ``make_spec(params)`` may
    replace the default ``LearnerSpec(family, params, options)`` factory.

    Raises:
        GridSearchError: every point failed.
    """
    if grid is None:
        grid = GRIDS[Family(family)]
    points = enumerate_grid(grid)
    if not points:
        raise ValueError("empty grid")
    if make_spec is None:
        def make_spec(params, _family=family, _options=options):
            return LearnerSpec(_family, params, _options or {})

    specs = []
    results = []
    for i, params in enumerate(points):
        try:
            specs.append(make_spec(params))
        except CascadeScreenError as exc:
            specs.append(None)
            results.append(GridPoint(i, params, None, f"{type(exc).__name__}: {exc}"))
            continue
        results.append(GridPoint(i, params))

    def evaluate(i):
        return cross_validate(specs[i], ds, features, k, seed, keep_models=False, **cv_kwargs)

    todo = [i for i, s in enumerate(specs) if s is not None]
    jobs = resolve_jobs(jobs)
    if jobs > 1:
        outs = parallel_map(_GridEval(specs, ds, features, k, seed, cv_kwargs), todo, jobs)
    else:
        outs = []
        for i in todo:
            try:
                outs.append(evaluate(i))
            except CascadeScreenError as exc:
                outs.append(exc)
    for i, out in zip(todo, outs):
        if isinstance(out, Exception):
            results[i].error = f"{type(out).__name__}: {out}"
        else:
            results[i].cv = out

    scored = [p for p in results if p.cv is not None]
    if not scored:
        raise GridSearchError("every grid point failed", [(p.index, p.error) for p in results])
    best = scored[0]
    for p in scored[1:]:
        if p.score > best.score:
            best = p
    tied = [p.index for p in scored if p.score == best.score and p.index != best.index]
    return GridSearchResult(results, best.index, tied)


class _GridEval:
    def __init__(self, specs, ds, features, k, seed, cv_kwargs):
        self.specs, self.ds, self.features = specs, ds, features
        self.k, self.seed, self.cv_kwargs = k, seed, cv_kwargs

    def __call__(self, i):
        try:
            return cross_validate(self.specs[i], self.ds, self.features, self.k, self.seed,
                                  keep_models=False, **self.cv_kwargs)
        except CascadeScreenError as exc:
            return exc


@dataclass
class SfsStep:
    feature: int
    name: str
    accuracy: float
    candidates: dict


@dataclass
class SfsResult:
    trace: list
    selected: tuple
    stop_reason: str

    def to_dict(self, feature_names=None):
        return {
            "selected": list(self.selected),
            "selected_names": None if feature_names is None else
            [feature_names[j] for j in self.selected],
            "stop_reason": self.stop_reason,
            "trace": [
                {"feature": s.feature, "name": s.name, "mean_test_accuracy": s.accuracy,
                 "candidates": {str(j): acc for j, acc in s.candidates.items()}}
                for s in self.trace
            ],
        }


def sequential_forward_select(spec, ds, k=10, seed=0, max_features=None, min_gain=0.0,
                              candidates=None, **cv_kwargs) -> SfsResult:
    """Greedy forward feature selection scored by mean CV test accuracy.

    Starting from the empty set, each step cross-validates every remaining
    candidate added to the current set (same seed, so same folds) and keeps
    the best one, ties going to the lower feature index. The first feature is
    always added. Selection stops at ``max_features`` or when the best gain
    over the current accuracy is not strictly positive or falls below
    ``min_gain``.
    """
    d = len(ds.feature_names)
    pool = list(range(d)) if candidates is None else sorted(int(c) for c in candidates)
    cap = len(pool) if max_features is None else int(max_features)
    if cap > d:
        raise ValueError(f"max_features={cap} exceeds the {d} available features")
    if cap < 1:
        raise ValueError("max_features must be >= 1")
    selected = []
    trace = []
    current = None
    reason = "max_features reached"
    while len(selected) < cap:
        remaining = [j for j in pool if j not in selected]
        if not remaining:
            reason = "no candidates left"
            break
        scores = {}
        for j in remaining:
            cv = cross_validate(spec, ds, tuple(sorted(selected + [j])), k, seed,
                                keep_models=False, **cv_kwargs)
            scores[j] = cv.mean_test["accuracy"]
        best_j = remaining[0]
        for j in remaining[1:]:
            if scores[j] > scores[best_j]:
                best_j = j
        best_acc = scores[best_j]
        if current is not None:
            gain = best_acc - current
            if gain <= 0 or gain < min_gain:
                reason = "no improvement" if gain <= 0 else "gain below min_gain"
                break
        selected.append(best_j)
        current = best_acc
        trace.append(SfsStep(best_j, ds.feature_names[best_j], best_acc, scores))
    return SfsResult(trace, tuple(selected), reason)
