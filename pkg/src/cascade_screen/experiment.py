"""Config-driven experiment runs: feature selection, tuning and the CV metric table.

A run walks the configured models in canonical order. An individual learner
goes through SFS (optional), then grid search on the selected features
(optional), then a final cross-validation. A cascade is built on the base
feature set chosen by SFS for its first-stage family, with each stage using
its family's tuned hyperparameters when tuning is on. A failing model
records its error and the run continues.

Reports are deterministic given the config: timestamps and durations live in
the ``provenance`` section, which :func:`report_without_provenance` strips.
"""

import copy
import csv
import hashlib
import io
import json
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from . import _kernels
from . import preprocess as pp
from ._seeding import mix_seed
from .cascade import CASCADE_SHAPES, Augmentation, CascadeMode, CascadeModel, CascadeSpec, fit_cascade
from .classifiers.models import model_from_dict
from .classifiers.spec import Family, LearnerSpec
from .dataset import Dataset, LoadMode, load_csv
from .errors import CascadeScreenError, SpecValidationError
from .metrics import METRIC_NAMES, MetricTriple, confusion, rounded
from .selection import cross_validate, grid_search, sequential_forward_select
from .synth import CohortSpec, generate_cohort

MODEL_ORDER = ("SVC", "MLP", "TREE", "FOREST", "SVC_DT", "SVC_DT_RF")
INDIVIDUAL = {"SVC": Family.SVC, "MLP": Family.MLP, "TREE": Family.TREE,
              "FOREST": Family.FOREST}
SHUFFLE_KEY = 0x5EED

DEFAULTS = {
    "k": 10,
    "seed": 0,
    "stratify": True,
    "shuffle_labels": False,
    "models": list(MODEL_ORDER),
    "cascade": {"mode": "OOF_SAFE", "augmentation": "PROBA", "nested_cv": False},
    "sfs": {"enabled": False, "max_features": None, "min_gain": 0.0},
    "grid": {"enabled": False},
    "preprocess": {"skew_threshold": pp.DEFAULT_SKEW_THRESHOLD, "global_fit": False},
    "accuracy_formula": "standard",
    "params": {},
    "options": {},
    "output_dir": "results",
    "jobs": 1,
}

METRICS_CSV_COLUMNS = ("model",) + tuple(
    f"{variant}_{part}_{metric}"
    for variant in ("mean", "best")
    for metric in METRIC_NAMES
    for part in ("train", "test")
) + ("status",)


def config_schema():
    return json.loads(resources.files(__package__).joinpath("experiment.schema.json")
                      .read_text(encoding="utf-8"))


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(out.get(key), dict) and isinstance(value, dict) and key not in ("params", "options"):
            out[key] = {**out[key], **value}
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, default-filled experiment configuration.

    ``raw`` holds the normalized dictionary that the report echoes; feeding it
    back through :meth:`from_dict` reproduces the run.
    """

    raw: dict
    base_dir: str = field(default=".", compare=False)

    @classmethod
    def from_dict(cls, d, base_dir="."):
        try:
            jsonschema.Draft7Validator(config_schema()).validate(d)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise SpecValidationError(f"invalid experiment config at {where}: {exc.message}") from None
        raw = _merge(DEFAULTS, d)
        if "synth" in raw:
            raw["synth"] = CohortSpec.from_dict(raw["synth"]).to_dict()
        for fam, params in raw["params"].items():
            LearnerSpec(fam, params, raw["options"].get(fam, {}))
        for fam, opts in raw["options"].items():
            LearnerSpec(fam, {}, opts)
        raw["models"] = [m for m in MODEL_ORDER if m in raw["models"]]
        return cls(raw, os.fspath(base_dir))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SpecValidationError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def models(self):
        return tuple(self.raw["models"])

    def learner_spec(self, family, params=None):
        fam = Family(family).value
        merged = {**self.raw["params"].get(fam, {}), **(params or {})}
        return LearnerSpec(fam, merged, self.raw["options"].get(fam, {}))

    def cv_kwargs(self):
        return {
            "stratify": self.raw["stratify"],
            "skew_threshold": self.raw["preprocess"]["skew_threshold"],
            "global_preprocess": self.raw["preprocess"]["global_fit"],
            "accuracy_formula": self.raw["accuracy_formula"],
        }

    def dataset_path(self):
        path = self.raw["dataset"]["path"]
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)


def load_dataset(config: ExperimentConfig):
    """The configured dataset and a short description of where it came from."""
    if "dataset" in config.raw:
        path = config.dataset_path()
        mode = LoadMode(config.raw["dataset"].get("load_mode", "STRICT"))
        ds = load_csv(path, mode)
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        source = {"kind": "csv", "path": config.raw["dataset"]["path"], "sha256": digest}
    else:
        cohort = generate_cohort(CohortSpec.from_dict(config.raw["synth"]))
        ds = cohort.dataset()
        source = {"kind": "synth", "intercept": cohort.intercept,
                  "realized_prevalence": cohort.realized_prevalence,
                  "warnings": list(cohort.warnings)}
    if config.raw["shuffle_labels"]:
        rng = np.random.default_rng(mix_seed(config.raw["seed"], SHUFFLE_KEY))
        ds = ds.with_labels(rng.permutation(ds.y))
        source["labels_shuffled"] = True
    return ds, source


@dataclass
class ModelPlan:
    name: str
    spec: object
    features: tuple
    sfs: object = None
    grid: object = None


class Planner:
    """Resolves feature sets and hyperparameters per model, caching SFS and grid runs."""

    def __init__(self, config: ExperimentConfig, ds: Dataset):
        self.config = config
        self.ds = ds
        self._sfs = {}
        self._grid = {}

    def _seed(self):
        return self.config.raw["seed"]

    def sfs_for(self, family):
        family = Family(family)
        if not self.config.raw["sfs"]["enabled"]:
            return None
        if family not in self._sfs:
            cfg = self.config.raw["sfs"]
            self._sfs[family] = sequential_forward_select(
                self.config.learner_spec(family), self.ds, self.config.raw["k"], self._seed(),
                max_features=cfg["max_features"], min_gain=cfg["min_gain"],
                **self.config.cv_kwargs())
        return self._sfs[family]

    def features_for(self, family):
        sfs = self.sfs_for(family)
        return tuple(range(len(self.ds.feature_names))) if sfs is None else tuple(sorted(sfs.selected))

    def grid_for(self, family):
        family = Family(family)
        if not self.config.raw["grid"]["enabled"]:
            return None
        if family not in self._grid:
            opts = self.config.raw["options"].get(family.value, {})
            self._grid[family] = grid_search(
                family, self.ds, self.features_for(family), self.config.raw["k"], self._seed(),
                options=opts, jobs=self.config.raw["jobs"], **self.config.cv_kwargs())
        return self._grid[family]

    def spec_for(self, family):
        grid = self.grid_for(family)
        return self.config.learner_spec(family, None if grid is None else grid.best_params)

    def plan(self, name) -> ModelPlan:
        if name in INDIVIDUAL:
            fam = INDIVIDUAL[name]
            features = self.features_for(fam)
            return ModelPlan(name, self.spec_for(fam), features, self.sfs_for(fam), self.grid_for(fam))
        shape = CASCADE_SHAPES[name]
        base = self.features_for(shape[0])
        cfg = self.config.raw["cascade"]
        spec = CascadeSpec(tuple(self.spec_for(fam) for fam in shape),
                           Augmentation(cfg["augmentation"]), CascadeMode(cfg["mode"]),
                           base_features=base, k=self.config.raw["k"],
                           skew_threshold=self.config.raw["preprocess"]["skew_threshold"])
        return ModelPlan(name, spec, base, self.sfs_for(shape[0]), None)


def _metric_block(values):
    return {"rounded": {k: rounded(v) for k, v in values.items()},
            "full": dict(values)}


def _cv_entry(cv):
    d = cv.to_dict()
    for key in ("mean_train", "mean_test", "best_train", "best_test"):
        d[key] = _metric_block(d[key])
    for fold in d["folds"]:
        fold["train"] = _metric_block(fold["train"])
        fold["test"] = _metric_block(fold["test"])
    return d


def _grid_entry(grid):
    return {
        "n_points": len(grid.points),
        "best_index": grid.best_index,
        "best_params": grid.best_params,
        "tie_break": {"rule": "earliest enumeration order", "tied": list(grid.tied_with_best)},
        "points": [{"index": p.index, "params": p.params, "error": p.error,
                    "mean_test_accuracy": p.score} for p in grid.points],
    }


def evaluate_model(plan: ModelPlan, config: ExperimentConfig, ds: Dataset):
    """Cross-validated metrics for one planned model (report entry without timings)."""
    seed = config.raw["seed"]
    k = config.raw["k"]
    entry = {
        "status": "ok",
        "features": list(plan.features),
        "feature_names": [ds.feature_names[j] for j in plan.features],
        "spec": plan.spec.to_dict(),
        "sfs": None if plan.sfs is None else plan.sfs.to_dict(ds.feature_names),
        "grid": None if plan.grid is None else _grid_entry(plan.grid),
        "seeds": {"master": seed, "folds": seed, "learner": "mix(master, fold)"},
    }
    if isinstance(plan.spec, CascadeSpec):
        model = fit_cascade(plan.spec, ds, seed=seed, assess=True)
        cv = model.final_cv
        entry["cv_kind"] = "final stage on augmented input"
        entry["stages"] = [
            {"family": s.spec.family.value, "source": s.source, "input_dim": s.input_dim,
             "cv": None if info.cv is None else _cv_entry(info.cv)["mean_test"]}
            for s, info in zip(model.stages, model.fit_info)
        ]
        if config.raw["cascade"]["nested_cv"]:
            nested = cross_validate(plan.spec, ds, None, k, seed, **config.cv_kwargs())
            entry["nested_cv"] = _cv_entry(nested)
    else:
        cv = cross_validate(plan.spec, ds, plan.features, k, seed, jobs=config.raw["jobs"],
                            **config.cv_kwargs())
        entry["cv_kind"] = "plain"
    entry["cv"] = _cv_entry(cv)
    return entry, cv


def table_rows(models):
    rows = []
    for name in MODEL_ORDER:
        if name not in models:
            continue
        entry = models[name]
        row = {"model": name, "status": entry["status"]}
        for col in METRICS_CSV_COLUMNS[1:-1]:
            variant, part, metric = col.split("_", 2)
            if entry["status"] == "ok":
                row[col] = entry["cv"][f"{variant}_{part}"]["full"][metric]
            else:
                row[col] = None
        rows.append(row)
    return rows


def metrics_csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_CSV_COLUMNS)
    for row in rows:
        out = []
        for col in METRICS_CSV_COLUMNS:
            v = row.get(col)
            if isinstance(v, float):
                out.append(f"{v:.4f}")
            else:
                out.append("" if v is None else str(v))
        writer.writerow(out)
    return buf.getvalue()


def run(config, progress=None):
    """Run the configured experiment and return the report dictionary."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    ds, source = load_dataset(config)
    planner = Planner(config, ds)
    models = {}
    durations = {}
    for name in config.models:
        t = time.perf_counter()
        try:
            plan = planner.plan(name)
            entry, _ = evaluate_model(plan, config, ds)
        except CascadeScreenError as exc:
            entry = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
        durations[name] = time.perf_counter() - t
        models[name] = entry
        if progress is not None:
            progress(name, entry)
    rows = table_rows(models)
    return {
        "config": config.raw,
        "software": {"package": "cascade-screen", "version": __version__,
                     "numpy": np.__version__, "kernel_backend": _kernels.BACKEND},
        "dataset": {"n": ds.n, "positives": ds.positive_count,
                    "prevalence": ds.prevalence, "feature_names": list(ds.feature_names),
                    "source": source},
        "models": models,
        "table": rows,
        "provenance": {
            "started_utc": started,
            "durations_seconds": {**durations, "total": time.perf_counter() - t0},
            "python": platform.python_version(),
            "platform": platform.platform(),
        },
    }


def report_without_provenance(report):
    return {k: v for k, v in report.items() if k != "provenance"}


def dumps_report(report):
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report, out_dir):
    """Write ``report.json`` and ``metrics.csv``; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    csv_path = os.path.join(out_dir, "metrics.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(dumps_report(report))
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_csv_text(report["table"]))
    return report_path, csv_path


# Deployable model documents (train / evaluate).

def fit_final(plan: ModelPlan, config: ExperimentConfig, ds: Dataset):
    """Fit ``plan`` on every row and return a JSON-serializable model document."""
    seed = config.raw["seed"]
    doc = {
        "format": "cascade-screen-model",
        "version": __version__,
        "name": plan.name,
        "feature_names": list(ds.feature_names),
        "features": list(plan.features),
        "spec": plan.spec.to_dict(),
    }
    if isinstance(plan.spec, CascadeSpec):
        model = fit_cascade(plan.spec, ds, seed=seed, assess=False)
        doc["kind"] = "cascade"
        doc["model"] = model.to_dict()
    else:
        cols = list(plan.features)
        X = ds.X[:, cols]
        prep = pp.fit(X, [ds.feature_names[j] for j in cols],
                      [ds.binary_mask[j] for j in cols],
                      config.raw["preprocess"]["skew_threshold"])
        model = plan.spec.fit(prep.transform(X), ds.y, seed=mix_seed(seed, 0))
        doc["kind"] = "single"
        doc["preprocess"] = prep.to_dict()
        doc["model"] = model.to_dict()
    return doc


class DeployedModel:
    """Scores full feature matrices with a model document from :func:`fit_final`."""

    def __init__(self, doc):
        if doc.get("format") != "cascade-screen-model":
            raise SpecValidationError("not a cascade-screen model document")
        self.doc = doc
        self.features = tuple(doc["features"])
        if doc["kind"] == "cascade":
            self.preprocess = None
            self.model = CascadeModel.from_dict(doc["model"])
        else:
            self.preprocess = pp.PreprocessModel.from_dict(doc["preprocess"])
            self.model = model_from_dict(doc["model"])

    def _inputs(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.doc["feature_names"]):
            raise SpecValidationError(
                f"expected {len(self.doc['feature_names'])} feature columns, got {X.shape}")
        X = X[:, list(self.features)]
        return X if self.preprocess is None else self.preprocess.transform(X)

    def predict(self, X):
        return np.asarray(self.model.predict(self._inputs(X)), dtype=np.int64)

    def predict_proba(self, X):
        return np.asarray(self.model.predict_proba(self._inputs(X)), dtype=np.float64)


def evaluate_document(doc, ds: Dataset, formula="standard"):
    model = DeployedModel(doc)
    pred = model.predict(ds.X)
    cm = confusion(ds.y, pred)
    triple = MetricTriple.from_confusion(cm, formula)
    return {
        "model": doc["name"],
        "n": ds.n,
        "confusion": cm.to_dict(),
        "metrics": _metric_block(triple.as_dict()),
    }
