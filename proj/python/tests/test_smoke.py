import json

import numpy as np
import pytest

import cqa

cqa.set_quiet()


def test_hand_metrics():
    truth = np.array([[0.0], [0.0], [1.0], [1.0]])
    scores = np.array([[0.1], [0.6], [0.5], [0.9]])
    assert cqa.concept_auc(scores, truth) == 0.75
    assert cqa.leak([0.5, 0.5], [0.5, 0.5]) == 1.0
    assert cqa.leak([0.25, -0.1], [0.5, 0.5]) == 0.25
    assert cqa.dci_from_relevance(np.eye(4)) == 1.0
    assert cqa.roc_auc([1.0, 2.0], [1.0, 1.0]) is None


def test_world_and_annotator():
    ds = cqa.generate_world("attributes", seed=3, n=4000, k=6)
    assert len(ds) == 4000
    assert ds.features.shape == (4000, 12)
    assert set(np.unique(ds.concepts)) == {0.0, 1.0}
    fpr, fnr = cqa.calibrate_flip_rates(0.69, 0.67)
    ann = cqa.simulate_annotator(ds, fpr, fnr, seed=1)
    precision, recall = cqa.annotation_agreement(ann, ds)
    assert abs(precision - 0.69) < 0.04
    assert abs(recall - 0.67) < 0.04


def test_train_evaluate_and_roundtrip(tmp_path):
    ds = cqa.generate_world("attributes", seed=5, n=1500, k=6)
    model = cqa.train_cbm(ds, seed=2)
    report = cqa.evaluate(ds, model, seed=2)
    assert report["f1_y"] > 0.9
    assert report["auc_c"] > 0.95
    assert 0.0 <= report["leak"] <= 1.0
    x = ds.features[0]
    e = model.explain(x, 1)
    assert e["score"] == pytest.approx(e["bias"] + sum(v for _, v in e["contributions"]))
    path = tmp_path / "model.cqa"
    model.save(path)
    back = cqa.load_model(path)
    assert np.array_equal(back.predict_concepts(ds.features), model.predict_concepts(ds.features))


def test_errors_map_to_exception_types():
    with pytest.raises(cqa.ConfigError, match="bogus"):
        cqa.run_pipeline(json.dumps({"version": 1, "world": {"preset": "attributes"}, "bogus": 1}), 1)
    with pytest.raises(cqa.ConfigError):
        cqa.calibrate_flip_rates(0.18, 0.64, 0.5)
    with pytest.raises(cqa.DataError):
        cqa.concept_auc(np.zeros((2, 1)), np.full((2, 1), 0.5))
    assert issubclass(cqa.DataError, cqa.CqaError)


def test_pipeline_is_deterministic():
    cfg = json.dumps({"version": 1, "world": {"preset": "attributes", "k": 6, "n": 1200},
                      "solver": {"forest_trees": 20}})
    a = cqa.run_pipeline(cfg, 4)
    b = cqa.run_pipeline(cfg, 4)
    for key in ("f1_y", "auc_c", "leak", "dis", "ois", "gap_curve"):
        assert a[key] == b[key]
    assert np.array_equal(a["relevance_learned"], b["relevance_learned"])
