import json

import numpy as np
import pytest

from cascade_screen.dataset import load_csv, validate_csv
from cascade_screen.errors import SpecValidationError
from cascade_screen.questionnaire import encode_record
from cascade_screen.synth import (
    DEFAULT_EFFECTS,
    CohortSpec,
    generate,
    generate_cohort,
    meta_path,
    mutual_information,
    write_cohort,
)

ZERO = {name: 0.0 for name in DEFAULT_EFFECTS}


def test_every_record_encodes(tmp_path):
    cohort = generate_cohort(CohortSpec(n=150, seed=4))
    for rec in cohort.records:
        fv = encode_record(rec)
        assert fv.label in (0, 1)
    path = tmp_path / "c.csv"
    write_cohort(cohort, path)
    assert validate_csv(path) == []
    assert load_csv(path).n == 150


def test_csv_is_byte_identical(tmp_path):
    spec = CohortSpec(n=60, seed=9)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cohort(generate_cohort(spec), a)
    write_cohort(generate_cohort(spec), b)
    assert a.read_bytes() == b.read_bytes()
    assert generate(CohortSpec(n=60, seed=10)) != generate(spec)


def test_rows_are_prefix_stable():
    # each row has its own generator, so a larger cohort extends a smaller one
    small = generate(CohortSpec(n=30, seed=2))
    large = generate(CohortSpec(n=60, seed=2))
    assert [r.ace_items for r in small] == [r.ace_items for r in large[:30]]


def test_prevalence_near_target():
    for target in (0.3, 0.5):
        realized = [generate_cohort(CohortSpec(n=400, prevalence=target, seed=s)).realized_prevalence
                    for s in range(20)]
        assert abs(np.mean(realized) - target) <= 0.05


def test_zero_effects_make_labels_independent():
    cohort = generate_cohort(CohortSpec(n=2000, effects=ZERO, seed=1))
    ds = cohort.dataset()
    for j in range(ds.X.shape[1]):
        assert mutual_information(ds.X[:, j], ds.y) < 0.02


def test_structure_when_effects_are_on():
    ds = generate_cohort(CohortSpec(n=1000, seed=1)).dataset()
    mdi = list(ds.feature_names).index("mdi_total")
    assert np.corrcoef(ds.X[:, mdi], ds.y)[0, 1] > 0.3


def test_huge_noise_is_a_null():
    ds = generate_cohort(CohortSpec(n=2000, noise_scale=1e6, seed=3)).dataset()
    for j in range(ds.X.shape[1]):
        assert abs(np.corrcoef(ds.X[:, j], ds.y)[0, 1]) < 0.1


def test_drift_warning():
    # every row has p = 0.5, so the realized rate is Binomial(20, 0.5) / 20; seed 15 lands on 0.2
    cohort = generate_cohort(CohortSpec(n=20, effects=ZERO, noise_scale=0.0, seed=15))
    assert cohort.expected_prevalence == pytest.approx(0.5)
    assert cohort.realized_prevalence == 0.2
    assert len(cohort.warnings) == 1 and "drifted" in cohort.warnings[0]
    assert generate_cohort(CohortSpec(n=400, seed=0)).warnings == ()


def test_spec_validation():
    for bad in ({"n": 5}, {"prevalence": 1.0}, {"noise_scale": -1}, {"item_sd": 0},
                {"trauma_base_rate": 2}):
        with pytest.raises(SpecValidationError):
            CohortSpec(**bad)
    with pytest.raises(SpecValidationError):
        CohortSpec(effects={"nope": 1})
    with pytest.raises(SpecValidationError):
        CohortSpec.from_dict({"n": 50, "colour": "red"})
    spec = CohortSpec(n=50, effects={"beta_mdi": 2})
    assert CohortSpec.from_dict(spec.to_dict()) == spec


def test_sidecar(tmp_path):
    cohort = generate_cohort(CohortSpec(n=40, seed=5))
    side = write_cohort(cohort, tmp_path / "x.csv")
    assert side == meta_path(tmp_path / "x.csv") == str(tmp_path / "x.meta.json")
    meta = json.loads(open(side).read())
    assert meta["spec"]["seed"] == 5 and meta["n"] == 40
    assert meta["realized_prevalence"] == cohort.realized_prevalence


def test_mutual_information_oracle():
    f = np.array([0, 0, 1, 1])
    assert mutual_information(f, np.array([0, 0, 1, 1])) == pytest.approx(np.log(2))
    assert mutual_information(f, np.array([0, 1, 0, 1])) == pytest.approx(0.0)
