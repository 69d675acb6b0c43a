"""Synthetic cohorts in the cohort CSV schema.

Generative model, per participant (each row has its own generator seeded by
``mix(seed, row)``):

* latent trauma ``t ~ Bernoulli(trauma_base_rate)``;
* each of the 16 ACE items ``~ Bernoulli(0.1 + 0.5 t)``;
* questionnaire items are rounded, clipped normals whose means shift with
  ``t`` by the ``ace_*`` effect sizes (the WHO-5 shift is downward);
* behavioral items ``~ Bernoulli(base + shift t)``;
* the label is ``Bernoulli(sigmoid(b + s + noise_scale * e))`` with
  ``e ~ N(0, 1)`` and ``s`` a linear score over standardized totals and
  self-harm plus an interaction bonus that fires only when both
  ``ace_cumulative`` and ``mdi_total`` exceed their thresholds.

The intercept ``b`` is solved by bisection so the mean label probability
over the generated rows equals the prevalence target. The interaction term
exists to give staged models (a margin score followed by a tree) something
to find; it is a property of this testbed, not a clinical claim.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import questionnaire as q
from ._seeding import rng_for
from .dataset import Dataset, write_csv
from .errors import SpecValidationError

DEFAULT_EFFECTS = {
    # latent trauma -> per-item mean shift, in answer units
    "ace_mdi": 1.4,
    "ace_gad7": 0.9,
    "ace_isi": 1.1,
    "ace_who5": 1.3,
    # label score weights, per standardized total
    "beta_ace": 0.6,
    "beta_mdi": 0.8,
    "beta_gad7": 0.3,
    "beta_isi": 0.3,
    "beta_who5": 0.4,
    "self_harm": 1.2,
    "mdi_x_ace": 3.0,
}

_ITEM_BASE = {"who5": 3.3, "mdi": 1.2, "gad7": 0.8, "isi": 1.0}
_BEHAVIOR_RATES = (0.08, 0.25)  # base, shift with t
PREVALENCE_DRIFT_LIMIT = 0.15


@dataclass(frozen=True)
class CohortSpec:
    n: int = 400
    prevalence: float = 0.5
    trauma_base_rate: float = 0.4
    effects: dict = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    noise_scale: float = 0.5
    item_sd: float = 1.0
    ace_threshold: int = 6
    mdi_threshold: int = 24
    seed: int = 0

    def __post_init__(self):
        effects = dict(DEFAULT_EFFECTS)
        for name, value in dict(self.effects).items():
            if name not in DEFAULT_EFFECTS:
                raise SpecValidationError(f"unknown effect size {name!r}")
            effects[name] = float(value)
        object.__setattr__(self, "effects", effects)
        if int(self.n) < 20:
            raise SpecValidationError(f"n must be >= 20, got {self.n}")
        if not 0.0 < self.prevalence < 1.0:
            raise SpecValidationError(f"prevalence must lie in (0, 1), got {self.prevalence}")
        if not 0.0 <= self.trauma_base_rate <= 1.0:
            raise SpecValidationError("trauma_base_rate must lie in [0, 1]")
        if not self.noise_scale >= 0.0 or not self.item_sd > 0.0:
            raise SpecValidationError("noise_scale must be >= 0 and item_sd > 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise SpecValidationError(f"unknown cohort spec keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Cohort:
    records: tuple
    spec: CohortSpec
    intercept: float
    expected_prevalence: float
    realized_prevalence: float
    warnings: tuple

    def dataset(self):
        return Dataset.from_records(self.records)

    def metadata(self):
        return {
            "spec": self.spec.to_dict(),
            "n": len(self.records),
            "intercept": self.intercept,
            "expected_prevalence": self.expected_prevalence,
            "realized_prevalence": self.realized_prevalence,
            "warnings": list(self.warnings),
        }


def _items(rng, count, mean, sd, lo, hi):
    draws = rng.normal(mean, sd, size=count)
    return tuple(int(v) for v in np.clip(np.rint(draws), lo, hi))


def _sigmoid(z):
    return 0.5 + 0.5 * np.tanh(0.5 * z)


def _solve_intercept(score, target, lo=-60.0, hi=60.0, iters=200):
    """Bisection for ``b`` with ``mean(sigmoid(score + b)) == target``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if float(np.mean(_sigmoid(score + mid))) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def _draw_row(spec, row):
    rng = rng_for(spec.seed, row)
    t = float(rng.random() < spec.trauma_base_rate)
    ace_p = 0.1 + 0.5 * t
    ace_values = (rng.random(q.ACE16.item_count) < ace_p).astype(int)
    ace_names = q.CANONICAL_ACE_ITEMS + q.DEFAULT_EXTRA_ACE_ITEMS
    e = spec.effects
    sd = spec.item_sd
    who5 = _items(rng, 5, _ITEM_BASE["who5"] - e["ace_who5"] * t, sd, 0, 5)
    mdi = _items(rng, 12, _ITEM_BASE["mdi"] + e["ace_mdi"] * t, sd, 0, 5)
    gad7 = _items(rng, 7, _ITEM_BASE["gad7"] + e["ace_gad7"] * t, sd, 0, 3)
    isi = _items(rng, 7, _ITEM_BASE["isi"] + e["ace_isi"] * t, sd, 0, 4)
    base, shift = _BEHAVIOR_RATES
    behavioral = {name: int(rng.random() < base + shift * t) for name in q.BEHAVIORAL_ITEMS}
    noise = float(rng.normal())
    u = float(rng.random())

    ace_cum = int(ace_values.sum())
    mdi_total = sum(mdi)
    who5_total = 4 * sum(who5)
    score = (
        e["beta_ace"] * (ace_cum - 4.0) / 3.0
        + e["beta_mdi"] * (mdi_total - 20.0) / 10.0
        + e["beta_gad7"] * (sum(gad7) - 7.0) / 4.0
        + e["beta_isi"] * (sum(isi) - 9.0) / 5.0
        - e["beta_who5"] * (who5_total - 50.0) / 20.0
        + e["self_harm"] * behavioral["self_harm"]
    )
    if ace_cum > spec.ace_threshold and mdi_total > spec.mdi_threshold:
        score += e["mdi_x_ace"]
    record = q.ParticipantRecord(
        id=f"p{row:05d}",
        ace_items=dict(zip(ace_names, (int(v) for v in ace_values))),
        who5_items=who5, mdi_items=mdi, gad7_items=gad7, isi_items=isi,
        behavioral=behavioral, label=None,
    )
    return record, score + spec.noise_scale * noise, u


def generate_cohort(spec: CohortSpec) -> Cohort:
    """Generate a cohort plus its calibration metadata; deterministic in ``spec``."""
    rows = [_draw_row(spec, i) for i in range(int(spec.n))]
    score = np.array([s for _, s, _ in rows])
    b = _solve_intercept(score, spec.prevalence)
    p = _sigmoid(score + b)
    records = []
    for (rec, _, u), pi in zip(rows, p):
        records.append(q.ParticipantRecord(
            rec.id, rec.ace_items, rec.who5_items, rec.mdi_items, rec.gad7_items,
            rec.isi_items, rec.behavioral, int(u < pi)))
    realized = sum(r.label for r in records) / len(records)
    expected = float(np.mean(p))
    notes = []
    if abs(realized - spec.prevalence) > PREVALENCE_DRIFT_LIMIT:
        notes.append(
            f"realized prevalence {realized:.3f} drifted more than {PREVALENCE_DRIFT_LIMIT} "
            f"from the target {spec.prevalence}")
    return Cohort(tuple(records), spec, float(b), expected, realized, tuple(notes))


def generate(spec: CohortSpec) -> list:
    """The participant records of :func:`generate_cohort`."""
    return list(generate_cohort(spec).records)


def meta_path(csv_path):
    root, _ = os.path.splitext(os.fspath(csv_path))
    return root + ".meta.json"


def write_cohort(cohort: Cohort, csv_path):
    """Write the CSV and its ``.meta.json`` sidecar; returns the sidecar path."""
    write_csv(cohort.records, csv_path)
    side = meta_path(csv_path)
    with open(side, "w", encoding="utf-8") as fh:
        json.dump(cohort.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return side


def mutual_information(feature, labels):
    """Plug-in mutual information (nats) between a discrete feature and 0/1 labels."""
    feature = np.asarray(feature)
    labels = np.asarray(labels)
    mi = 0.0
    for v in np.unique(feature):
        pv = float(np.mean(feature == v))
        for c in (0, 1):
            pj = float(np.mean((feature == v) & (labels == c)))
            pc = float(np.mean(labels == c))
            if pj > 0:
                mi += pj * math.log(pj / (pv * pc))
    return mi
