"""Skew-aware column preprocessing.

Binary columns pass through untouched. Numeric columns whose adjusted
sample skewness exceeds a threshold are Yeo-Johnson transformed (lambda by
maximum likelihood) and then z-scored; the rest are only z-scored. All
statistics come from the fit data and are frozen in :class:`PreprocessModel`.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import EmptyDatasetError, SchemaError, UndefinedSkewError

DEFAULT_SKEW_THRESHOLD = 0.75
LAMBDA_BOUNDS = (-5.0, 5.0)
LAMBDA_TOL = 1e-4

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class Plan(str, Enum):
    BINARY_PASSTHROUGH = "BINARY_PASSTHROUGH"
    POWER_THEN_STANDARDIZE = "POWER_THEN_STANDARDIZE"
    STANDARDIZE = "STANDARDIZE"


def sample_skewness(column) -> float:
    """Adjusted Fisher-Pearson skewness ``g1 * sqrt(n(n-1)) / (n-2)``."""
    x = np.asarray(column, dtype=np.float64).ravel()
    n = x.size
    if n < 3:
        raise UndefinedSkewError(f"skewness needs >= 3 values, got {n}")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 <= 0.0 or m2 <= (1e-14 * max(1.0, float(np.max(np.abs(x))))) ** 2:
        raise UndefinedSkewError("skewness undefined for a constant column")
    m3 = np.mean(d * d * d)
    g1 = m3 / m2 ** 1.5
    return float(g1 * math.sqrt(n * (n - 1.0)) / (n - 2.0))


def yeo_johnson(x, lam):
    """Yeo-Johnson transform of ``x`` for a fixed ``lam`` (vectorized)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    xp = x[pos]
    xn = x[~pos]
    if abs(lam) < 1e-12:
        out[pos] = np.log1p(xp)
    else:
        out[pos] = np.expm1(lam * np.log1p(xp)) / lam
    if abs(lam - 2.0) < 1e-12:
        out[~pos] = -np.log1p(-xn)
    else:
        out[~pos] = -np.expm1((2.0 - lam) * np.log1p(-xn)) / (2.0 - lam)
    return out


def yeo_johnson_loglik(x, lam) -> float:
    """Profile log-likelihood of ``lam`` under a normal model for the transformed data."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    t = yeo_johnson(x, lam)
    var = np.var(t)
    if not np.isfinite(var):
        return -math.inf
    if var <= 0.0:
        return math.inf if n else -math.inf
    jac = np.sum(np.sign(x) * np.log1p(np.abs(x)))
    return float(-0.5 * n * math.log(var) + (lam - 1.0) * jac)


def fit_yeo_johnson(column, bounds=LAMBDA_BOUNDS, tol=LAMBDA_TOL) -> float:
    """Maximum-likelihood lambda by golden-section search on ``bounds``."""
    x = np.asarray(column, dtype=np.float64).ravel()
    if x.size < 3:
        raise ValueError("fit_yeo_johnson needs >= 3 values")
    a, b = map(float, bounds)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = yeo_johnson_loglik(x, c)
    fd = yeo_johnson_loglik(x, d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = yeo_johnson_loglik(x, c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = yeo_johnson_loglik(x, d)
    return (a + b) / 2.0


@dataclass(frozen=True)
class ColumnPlan:
    name: str
    plan: Plan
    lam: Optional[float] = None
    mean: float = 0.0
    std: float = 1.0

    def apply(self, values):
        v = np.asarray(values, dtype=np.float64)
        if self.plan is Plan.BINARY_PASSTHROUGH:
            return v.copy()
        if self.plan is Plan.POWER_THEN_STANDARDIZE:
            v = yeo_johnson(v, self.lam)
        return (v - self.mean) / self.std

    def to_dict(self):
        return {"name": self.name, "plan": self.plan.value, "lambda": self.lam,
                "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], Plan(d["plan"]), d.get("lambda"), float(d["mean"]), float(d["std"]))


@dataclass(frozen=True)
class PreprocessModel:
    columns: tuple
    skew_threshold: float = DEFAULT_SKEW_THRESHOLD
    warnings: tuple = field(default=())

    @property
    def feature_names(self):
        return tuple(c.name for c in self.columns)

    @property
    def plans(self):
        return {c.name: c.plan for c in self.columns}

    def transform(self, X):
        """Apply the fitted plan to a ``(n, d)`` matrix or a single row."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise SchemaError(
                f"expected {len(self.columns)} columns, got shape {X.shape}"
            )
        out = np.empty_like(X)
        for j, col in enumerate(self.columns):
            out[:, j] = col.apply(X[:, j])
        return out[0] if single else out

    def transform_vector(self, fv):
        from .questionnaire import FeatureVector

        if tuple(fv.names) != self.feature_names:
            raise SchemaError("feature vector names do not match the fitted schema")
        return FeatureVector(tuple(float(v) for v in self.transform(np.array(fv.values))),
                             fv.label, fv.names)

    def to_dict(self):
        return {
            "skew_threshold": self.skew_threshold,
            "columns": [c.to_dict() for c in self.columns],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(ColumnPlan.from_dict(c) for c in d["columns"]),
                   float(d["skew_threshold"]), tuple(d.get("warnings", ())))


def _is_constant(v):
    return v.size == 0 or float(np.max(v) - np.min(v)) == 0.0


def fit(X, feature_names=None, binary_mask=None,
        skew_threshold=DEFAULT_SKEW_THRESHOLD) -> PreprocessModel:
    """Fit a preprocessing plan on ``X``.

    ``X`` may be a :class:`~cascade_screen.dataset.Dataset`, in which case its
    feature names and binary mask are used.
    """
    if hasattr(X, "binary_mask") and hasattr(X, "X"):
        feature_names = X.feature_names if feature_names is None else feature_names
        binary_mask = X.binary_mask if binary_mask is None else binary_mask
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("cannot fit preprocessing on an empty dataset")
    d = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(d))
    mask = tuple(binary_mask) if binary_mask is not None else (False,) * d
    if len(names) != d or len(mask) != d:
        raise SchemaError("feature_names / binary_mask length does not match X")

    columns = []
    notes = []
    for j in range(d):
        v = X[:, j]
        if mask[j]:
            columns.append(ColumnPlan(names[j], Plan.BINARY_PASSTHROUGH))
            continue
        if _is_constant(v):
            notes.append(f"{names[j]}: constant column left untransformed")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            columns.append(ColumnPlan(names[j], Plan.BINARY_PASSTHROUGH))
            continue
        plan, lam = Plan.STANDARDIZE, None
        if v.size >= 3 and abs(sample_skewness(v)) > skew_threshold:
            plan = Plan.POWER_THEN_STANDARDIZE
            lam = fit_yeo_johnson(v)
            v = yeo_johnson(v, lam)
        mean = float(np.mean(v))
        std = float(np.std(v))
        if not std > 0.0:
            notes.append(f"{names[j]}: zero variance after transform, left untransformed")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            columns.append(ColumnPlan(names[j], Plan.BINARY_PASSTHROUGH))
            continue
        columns.append(ColumnPlan(names[j], plan, lam, mean, std))
    return PreprocessModel(tuple(columns), float(skew_threshold), tuple(notes))


def transform(model: PreprocessModel, x):
    """Apply ``model`` to a feature vector or matrix."""
    if hasattr(x, "values") and hasattr(x, "label"):
        return model.transform_vector(x)
    return model.transform(x)
