import csv
import io
import json

import numpy as np
import pytest

from cascade_screen.errors import SpecValidationError
from cascade_screen.experiment import (
    METRICS_CSV_COLUMNS,
    MODEL_ORDER,
    DeployedModel,
    ExperimentConfig,
    Planner,
    dumps_report,
    evaluate_document,
    fit_final,
    load_dataset,
    metrics_csv_text,
    report_without_provenance,
    run,
    write_report,
)

FAST_OPTIONS = {"MLP": {"max_epochs": 20}, "FOREST": {"n_trees": 10}}


def small(**extra):
    cfg = {"synth": {"n": 60, "seed": 3}, "k": 3, "seed": 1, "options": FAST_OPTIONS}
    cfg.update(extra)
    return cfg


def test_tree_smoke_run():
    report = run(small(synth={"n": 40, "seed": 0}, k=2, models=["TREE"]))
    assert list(report["models"]) == ["TREE"]
    entry = report["models"]["TREE"]
    assert entry["status"] == "ok" and len(entry["cv"]["folds"]) == 2
    assert [r["model"] for r in report["table"]] == ["TREE"]
    assert report["dataset"]["n"] == 40


def test_full_table_shape(tmp_path):
    report = run(small())
    assert [r["model"] for r in report["table"]] == list(MODEL_ORDER)
    _, csv_path = write_report(report, tmp_path)
    rows = list(csv.reader(open(csv_path)))
    assert rows[0] == list(METRICS_CSV_COLUMNS)
    assert len(rows) == 7 and all(len(r) == len(METRICS_CSV_COLUMNS) for r in rows)
    # 6 models by (mean, best) x (accuracy, sensitivity, specificity), train and test
    assert len(METRICS_CSV_COLUMNS) == 1 + 2 * 3 * 2 + 1
    for r in rows[1:]:
        assert r[-1] == "ok"
        for cell in r[1:-1]:
            assert 0.0 <= float(cell) <= 1.0 and len(cell.split(".")[1]) == 4
    cascade = report["models"]["SVC_DT_RF"]
    assert [s["input_dim"] for s in cascade["stages"]] == [17, 18, 19]
    assert cascade["cv_kind"] == "final stage on augmented input"


def test_reports_are_deterministic():
    a, b = run(small(models=["SVC", "SVC_DT"])), run(small(models=["SVC", "SVC_DT"]))
    assert dumps_report(report_without_provenance(a)) == dumps_report(report_without_provenance(b))
    assert metrics_csv_text(a["table"]) == metrics_csv_text(b["table"])


def test_seed_changes_results():
    a = run(small(models=["TREE"]))
    b = run(small(models=["TREE"], seed=2))
    assert a["models"]["TREE"]["cv"] != b["models"]["TREE"]["cv"]


def test_failed_model_is_recorded_not_fatal(monkeypatch):
    from cascade_screen import experiment
    from cascade_screen.errors import TrainingError

    real = experiment.evaluate_model

    def flaky(plan, config, ds):
        if plan.name == "MLP":
            raise TrainingError("diverged", fold=0, epoch=3)
        return real(plan, config, ds)

    monkeypatch.setattr(experiment, "evaluate_model", flaky)
    report = run(small(models=["TREE", "MLP"]))
    assert report["models"]["MLP"]["status"] == "failed"
    assert report["models"]["MLP"]["error"].startswith("TrainingError")
    assert report["models"]["TREE"]["status"] == "ok"
    row = [r for r in report["table"] if r["model"] == "MLP"][0]
    assert row["status"] == "failed" and row["mean_test_accuracy"] is None
    assert metrics_csv_text(report["table"]).splitlines()[1].endswith(",,failed")


@pytest.mark.parametrize("bad", [
    {"synth": {}, "k": 1},
    {"synth": {}, "modles": ["SVC"]},
    {"synth": {}, "models": ["KNN"]},
    {"synth": {}, "sfs": {"enabled": True, "max_feature": 3}},
    {},
    {"synth": {}, "dataset": {"path": "x.csv"}},
    {"synth": {"n": 50, "colour": 1}},
    {"synth": {}, "params": {"SVC": {"gama": 1}}},
    {"synth": {}, "options": {"TREE": {"x": 1}}},
])
def test_schema_rejects(bad):
    with pytest.raises(SpecValidationError):
        ExperimentConfig.from_dict(bad)


def test_defaults_and_model_order():
    cfg = ExperimentConfig.from_dict({"synth": {}, "models": ["SVC_DT", "SVC"]})
    assert cfg.models == ("SVC", "SVC_DT")
    assert cfg["k"] == 10 and cfg["cascade"]["mode"] == "OOF_SAFE"
    assert ExperimentConfig.from_dict(cfg.raw).raw == cfg.raw


def test_sfs_and_grid_flow_into_cascade():
    cfg = ExperimentConfig.from_dict(small(
        models=["TREE", "SVC_DT"], sfs={"enabled": True, "max_features": 3},
        grid={"enabled": True}, params={}, options=FAST_OPTIONS))
    ds, _ = load_dataset(cfg)
    planner = Planner(cfg, ds)
    tree = planner.plan("TREE")
    assert 1 <= len(tree.features) <= 3 and tree.grid is not None
    cascade = planner.plan("SVC_DT")
    assert cascade.features == planner.plan("SVC").features
    assert cascade.spec.stages[1].params == tree.spec.params


def test_shuffle_labels_keeps_prevalence():
    cfg = ExperimentConfig.from_dict(small(shuffle_labels=True))
    ds, source = load_dataset(cfg)
    plain, _ = load_dataset(ExperimentConfig.from_dict(small()))
    assert source["labels_shuffled"] and ds.positive_count == plain.positive_count
    assert not np.array_equal(ds.y, plain.y)
    assert np.array_equal(ds.X, plain.X)


def test_csv_dataset_source(tmp_path):
    from cascade_screen.synth import CohortSpec, generate_cohort, write_cohort

    write_cohort(generate_cohort(CohortSpec(n=40)), tmp_path / "c.csv")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"dataset": {"path": "c.csv"}, "k": 2, "models": ["TREE"]}))
    cfg = ExperimentConfig.load(cfg_path)
    ds, source = load_dataset(cfg)
    assert ds.n == 40 and len(source["sha256"]) == 64


@pytest.mark.parametrize("name", ["TREE", "SVC_DT"])
def test_fit_final_document_round_trip(name):
    cfg = ExperimentConfig.from_dict(small())
    ds, _ = load_dataset(cfg)
    doc = fit_final(Planner(cfg, ds).plan(name), cfg, ds)
    doc = json.loads(json.dumps(doc))
    model = DeployedModel(doc)
    assert model.predict(ds.X).shape == (ds.n,)
    result = evaluate_document(doc, ds)
    assert result["n"] == ds.n and 0.5 <= result["metrics"]["full"]["accuracy"] <= 1.0
    with pytest.raises(SpecValidationError):
        DeployedModel({"format": "other"})
