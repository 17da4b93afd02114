import math

import numpy as np
import pytest

import ransomxai.pipeline as pipeline_mod
import ransomxai.search as search_mod
from ransomxai.data import Dataset, SynthSpec, stratified_split, synth_data2_like, synth_generate
from ransomxai.errors import ConfigMismatch, InvalidSpec
from ransomxai.learners import KNNParams
from ransomxai.parallel import threads
from ransomxai.pipeline import PipelineConfig, nested_cv, run_pipeline
from ransomxai.rfecv import RfecvConfig
from ransomxai.search import (DEFAULT_SPACES, Choice, LogUniform, SearchConfig, Uniform, draw_params,
                              random_search, space_from_json)


def blobs(rows=10, classes=15, seed=0, n_noise=2):
    ds = synth_generate(SynthSpec(classes, rows, 3, n_noise, class_sep=6.0), seed)
    return ds


def test_distributions_validate():
    with pytest.raises(InvalidSpec):
        Choice(())
    with pytest.raises(InvalidSpec):
        Uniform(1.0, 1.0)
    with pytest.raises(InvalidSpec):
        LogUniform(0.0, 1.0)
    rng = np.random.default_rng(0)
    v = [LogUniform(1e-4, 1e2).sample(rng) for _ in range(200)]
    assert min(v) >= 1e-4 and max(v) <= 1e2
    assert SearchConfig().n_iter == 25
    with pytest.raises(InvalidSpec):
        SearchConfig(n_iter=0)


def test_space_from_json():
    sp = space_from_json({"k": [1, 3], "variance_smoothing": {"type": "loguniform", "lo": 1e-9, "hi": 1e-6},
                          "x": {"type": "uniform", "lo": 0, "hi": 1}, "weighting": "uniform"})
    assert sp["k"] == Choice((1, 3))
    assert sp["variance_smoothing"] == LogUniform(1e-9, 1e-6)
    assert sp["x"] == Uniform(0.0, 1.0)
    assert sp["weighting"] == Choice(("uniform",))


def test_default_spaces_cover_kinds():
    for kind, space in DEFAULT_SPACES.items():
        for hp in draw_params(kind, space, 5, seed=1):
            assert type(hp).__name__.startswith(kind)


def test_unknown_hyperparameter():
    with pytest.raises(ConfigMismatch):
        random_search("KNN", {"depth": Choice((1,))}, np.zeros((4, 1)), [0, 1, 0, 1], SearchConfig(n_iter=1))


def test_single_draw_is_best():
    ds = blobs(rows=6, classes=3)
    res = random_search("NB", None, ds.to_matrix(), ds.labels, SearchConfig(n_iter=1, cv_folds=3))
    assert len(res.trials) == 1
    assert res.best_hp == res.trials[0].hyperparams
    assert res.best_cv_score == res.trials[0].mean


def test_knn_k1_beats_k200():
    ds = blobs(rows=10, classes=15)
    X = ds.to_matrix()
    space = {"k": Choice((1, 200))}
    res = random_search("KNN", space, X, ds.labels, SearchConfig(n_iter=6, cv_folds=5, seed=0))
    assert res.best_hp.k == 1
    by_k = {t.hyperparams.k: t.mean for t in res.trials}
    assert by_k[1] > 0.9
    # k=200 exceeds every fold: uniform votes over all 120 rows, an 8-way tie -> lowest class
    assert by_k[200] == pytest.approx(1 / 15)


def test_determinism_and_order_invariance():
    ds = blobs(rows=6, classes=4)
    cfg = SearchConfig(n_iter=5, cv_folds=3, seed=7)
    a = random_search("SVM", None, ds.to_matrix(), ds.labels, cfg)
    with threads(4):
        b = random_search("SVM", None, ds.to_matrix(), ds.labels, cfg)
    assert [t.to_dict() for t in a.trials] == [t.to_dict() for t in b.trials]
    assert a.best_cv_score == max(t.mean for t in a.trials)


def test_ties_go_to_earlier_trial():
    ds = blobs(rows=6, classes=3)
    res = random_search("KNN", {"k": Choice((1, 2, 3))}, ds.to_matrix(), ds.labels,
                        SearchConfig(n_iter=6, cv_folds=3))
    means = [t.mean for t in res.trials]
    first = means.index(max(means))
    assert res.best_hp == res.trials[first].hyperparams


def test_failed_trial_scores_minus_inf(monkeypatch):
    real = search_mod.train

    def flaky(kind, hp, *a, **k):
        if hp.k == 2:
            raise RuntimeError("boom")
        return real(kind, hp, *a, **k)

    monkeypatch.setattr(search_mod, "train", flaky)
    ds = blobs(rows=6, classes=3)
    res = random_search("KNN", {"k": Choice((1, 2))}, ds.to_matrix(), ds.labels, SearchConfig(n_iter=6, cv_folds=3))
    failed = [t for t in res.trials if t.hyperparams.k == 2]
    assert failed and all(t.mean == -math.inf and "boom" in t.error for t in failed)
    assert res.best_hp.k == 1


# ---------------------------------------------------------------- pipeline


def split(ds, seed=0):
    sp = stratified_split(ds, 0.2, seed)
    return ds.take(sp.train), ds.take(sp.test)


SMALL = SearchConfig(n_iter=2, cv_folds=3)


def test_pipeline_without_fs_uses_all_columns():
    train, test = split(synth_data2_like(0, rows_per_class=10))
    res = run_pipeline(PipelineConfig("NB", search=SMALL), train, test)
    assert res.feature_names == res.all_feature_names == res.preprocessor.output_names
    assert res.rfecv is None
    assert res.stages == ["preprocess", "search", "final-fit", "test-transform", "predict"]
    assert res.confusion.total == test.n_rows


def test_pipeline_fs_with_min_all_matches_no_fs():
    train, test = split(blobs(rows=10, classes=5))
    d = train.n_features
    a = run_pipeline(PipelineConfig("LR", search=SMALL, seed=4), train, test)
    b = run_pipeline(PipelineConfig("LR", search=SMALL, seed=4,
                                    rfecv=RfecvConfig(min_features_to_select=d, cv_folds=3)), train, test)
    assert np.array_equal(a.y_pred, b.y_pred)
    assert b.rfecv.n_selected == d


def test_pipeline_fs_feature_names_equal_support():
    train, test = split(blobs(rows=10, classes=5))
    res = run_pipeline(PipelineConfig("SVM", search=SMALL, rfecv=RfecvConfig(min_features_to_select=2, cv_folds=3)),
                       train, test)
    assert res.feature_names == res.rfecv.selected
    assert res.model.feature_names == res.rfecv.selected
    assert res.seconds >= res.final_fit_seconds > 0


class TracedDataset(Dataset):
    """Records reads of row data; raises if they happen before ``allowed``."""
    gate = {"allowed": False, "reads": 0}

    def __getattribute__(self, name):
        if name in ("columns", "labels"):
            gate = type(self).gate
            if not gate["allowed"]:
                raise AssertionError(f"test partition read ({name}) before the final fit")
            gate["reads"] += 1
        return super().__getattribute__(name)


def test_pipeline_never_reads_test_before_final_fit(monkeypatch):
    train, test = split(synth_data2_like(1, rows_per_class=10))
    traced = Dataset(test.schema, list(test.columns), test.labels)
    traced.__class__ = TracedDataset
    TracedDataset.gate.update(allowed=False, reads=0)
    real = pipeline_mod.train_model

    def opening(*a, **k):
        model = real(*a, **k)
        TracedDataset.gate["allowed"] = True
        return model

    monkeypatch.setattr(pipeline_mod, "train_model", opening)
    res = run_pipeline(PipelineConfig("KNN", search=SMALL, rfecv=RfecvConfig(min_features_to_select=9, cv_folds=3)),
                       train, traced)
    assert TracedDataset.gate["reads"] > 0
    assert res.report.accuracy >= 0


def test_pipeline_schema_mismatch():
    train, _ = split(synth_data2_like(0, rows_per_class=5))
    other = blobs(rows=5, classes=3)
    with pytest.raises(ConfigMismatch):
        run_pipeline(PipelineConfig("NB", search=SMALL), train, other)
    with pytest.raises(ConfigMismatch):
        PipelineConfig("NB", space={"k": Choice((1,))})


def test_pipeline_two_arms_smoke():
    from ransomxai.data import synth_data1_like
    train, test = split(synth_data1_like(0, rows_per_class=12))
    arms = [run_pipeline(PipelineConfig("LR", search=SMALL, rfecv=fs), train, test)
            for fs in (None, RfecvConfig(min_features_to_select=34, step=4, cv_folds=3))]
    assert [a.fs_enabled for a in arms] == [False, True]
    assert arms[0].report.accuracy > 100 / 15
    assert 34 <= len(arms[1].feature_names) <= 68


def test_nested_cv():
    ds = blobs(rows=10, classes=3)
    res = nested_cv(PipelineConfig("NB", search=SMALL), ds, n_outer=3)
    assert len(res.fold_accuracies) == 3
    assert sum(r.confusion.total for r in res.fold_results) == ds.n_rows
    assert 0 <= res.mean <= 100
