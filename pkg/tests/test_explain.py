import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import game_value, permutation_shapley, subset_shapley, table_score_fn
from ransomxai.errors import InvalidSpec, TooManyFeatures
from ransomxai.explain import (ShapConfig, SummaryRanking, all_coalitions, explain_dataset,
                               kernel_shap, kernel_shap_multi, sample_background,
                               shapley_kernel_weight, summarize, tree_shap_small)
from ransomxai.learners import LRParams, RFParams, train
from ransomxai.learners.forest import Tree


def test_kernel_weight_values():
    assert shapley_kernel_weight(4, 1) == pytest.approx(3 / (4 * 1 * 3))
    assert shapley_kernel_weight(4, 2) == pytest.approx(3 / (6 * 2 * 2))
    assert all_coalitions(3).sum() == 12


def test_null_game():
    bg = np.random.default_rng(0).normal(size=(5, 4))
    base, phi = kernel_shap(lambda H: np.full(len(H), 2.5), np.ones(4), bg)
    assert base == 2.5 and np.all(phi == 0)


@given(st.integers(0, 10**6), st.integers(1, 9))
def test_linear_game_closed_form(seed, M):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=M)
    bg = rng.normal(size=(7, M))
    x = rng.normal(size=M)
    base, phi = kernel_shap(lambda H: H @ w, x, bg)
    assert np.allclose(phi, w * (x - bg.mean(axis=0)), atol=1e-9)
    assert base == pytest.approx(float(np.mean(bg @ w)))


def test_m5_matches_permutation_oracle():
    rng = np.random.default_rng(3)
    M = 5
    f = lambda H: np.sin(H @ rng_w) + H[:, 0] * H[:, 3] ** 2
    rng_w = rng.normal(size=M)
    bg = rng.normal(size=(6, M))
    x = rng.normal(size=M)
    _, phi = kernel_shap(f, x, bg)
    oracle = permutation_shapley(lambda mask: game_value(f, x, bg, mask), M)
    assert np.allclose(phi, oracle, atol=1e-6)
    assert np.allclose(oracle, subset_shapley(lambda mask: game_value(f, x, bg, mask), M), atol=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_random_tables_match_oracle(seed, M):
    rng = np.random.default_rng(seed)
    table = rng.normal(size=2 ** M)
    f = table_score_fn(table, M)
    bg = rng.integers(0, 2, size=(rng.integers(1, 5), M)).astype(float)
    x = rng.integers(0, 2, size=M).astype(float)
    base, phi = kernel_shap(f, x, bg)
    oracle = permutation_shapley(lambda mask: game_value(f, x, bg, mask), M)
    assert np.allclose(phi, oracle, atol=1e-6)
    assert abs(f(x[None])[0] - base - phi.sum()) <= 1e-8


def test_symmetry_and_dummy():
    f = lambda H: H[:, 0] * H[:, 1] + H[:, 0] + H[:, 1]
    bg = np.array([[0.0, 0.0, 5.0], [1.0, 1.0, -2.0]])
    _, phi = kernel_shap(f, np.array([2.0, 2.0, 9.0]), bg)
    assert phi[0] == pytest.approx(phi[1], abs=1e-12)
    assert phi[2] == pytest.approx(0.0, abs=1e-12)


def test_sign_semantics():
    bg = np.linspace(0, 1, 11)[:, None]
    _, phi = kernel_shap(lambda H: H[:, 0] ** 3, np.array([0.9]), bg)
    assert phi[0] > 0
    _, phi = kernel_shap(lambda H: np.exp(H[:, 0]), np.array([0.1]), bg)
    assert phi[0] < 0


def test_sampled_mode_local_accuracy_and_seed():
    rng = np.random.default_rng(0)
    M = 20
    w = rng.normal(size=M)
    f = lambda H: np.tanh(H @ w / 3)
    bg = rng.normal(size=(30, M))
    x = rng.normal(size=M)
    cfg = ShapConfig(exact_threshold=8, n_coalition_samples=512, seed=5)
    base, phi = kernel_shap(f, x, bg, cfg)
    assert abs(f(x[None])[0] - base - phi.sum()) < 1e-9  # the sum constraint is enforced exactly
    again = kernel_shap(f, x, bg, cfg)[1]
    assert np.array_equal(phi, again)


def test_multi_output_matches_single():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(4, 3))
    bg = rng.normal(size=(5, 4))
    x = rng.normal(size=4)
    base, phi = kernel_shap_multi(lambda H: np.tanh(H @ W), x, bg, ShapConfig())
    for c in range(3):
        b, p = kernel_shap(lambda H: np.tanh(H @ W)[:, c], x, bg)
        assert base[c] == pytest.approx(b) and np.allclose(phi[:, c], p, atol=1e-12)


def test_config_validation():
    with pytest.raises(InvalidSpec):
        ShapConfig(background_size=0)
    with pytest.raises(InvalidSpec):
        ShapConfig(target="all")


def test_background_sampling():
    X = np.arange(500.0).reshape(250, 2)
    a = sample_background(X, ShapConfig(background_size=100, seed=1))
    assert a.shape == (100, 2) and np.array_equal(a, sample_background(X, ShapConfig(background_size=100, seed=1)))
    assert np.array_equal(sample_background(X[:10], ShapConfig()), X[:10])


def forest_model(seed, M=4, n_trees=3, depth=3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(60, M))
    y = (X[:, 0] + X[:, 1] * X[:, 2] > 0.7).astype(int) + (X[:, -1] > 0.8)
    if len(np.unique(y)) < 2:
        y[:3] = [0, 1, 2]
    return train("RF", RFParams(n_trees=n_trees, max_depth=depth, max_features="all"), X, y, seed=seed), rng


def test_tree_shap_matches_kernel_exact():
    model, rng = forest_model(0)
    bg = rng.uniform(size=(8, 4))
    x = rng.uniform(size=4)
    target = model.predict(x[None])[0]
    pos = int(np.searchsorted(model.classes, target))
    base, phi = tree_shap_small(model, x, bg)
    kb, kp = kernel_shap(lambda H: model.score_matrix(H)[:, pos], x, bg)
    assert np.allclose(phi, kp, atol=1e-9) and base == pytest.approx(kb, abs=1e-12)


def test_tree_shap_dummy_and_linearity():
    model, rng = forest_model(1)
    stump = Tree([0, -1, -1], [0.5, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                 [[1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    bg = rng.uniform(size=(6, 4))
    x = np.array([0.9, 0.1, 0.2, 0.3])
    model.estimator.trees = [stump]
    _, phi1 = tree_shap_small(model, x, bg, target=model.classes[1])
    assert np.all(phi1[1:] == 0)
    model.estimator.trees = [stump, stump]
    _, phi2 = tree_shap_small(model, x, bg, target=model.classes[1])
    assert np.allclose(phi1, phi2, atol=1e-15)


def test_tree_shap_too_many_features():
    model, rng = forest_model(2, M=5)
    with pytest.raises(TooManyFeatures):
        tree_shap_small(model, rng.uniform(size=5), rng.uniform(size=(3, 5)), ShapConfig(exact_threshold=4))


def test_explain_dataset_and_summary():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(90, 4))
    y = (X[:, 0] > 0.5).astype(int) + (X[:, 0] > 0.8)
    model = train("LR", LRParams(epochs=300, learning_rate=0.5), X, y, feature_names=["a", "b", "c", "d"])
    bg = sample_background(X, ShapConfig(background_size=20))
    shap = explain_dataset(model, X[:10], bg, ShapConfig())
    assert shap.values.shape == (10, 1, 4)
    S = model.score_matrix(X[:10])
    for r in range(10):
        pos = int(np.searchsorted(model.classes, shap.targets[r, 0]))
        assert S[r, pos] == pytest.approx(shap.base_values[r, 0] + shap.values[r, 0].sum(), abs=1e-8)
    rank = summarize(shap)
    assert rank.features[0] == "a"
    assert sorted(rank.features) == ["a", "b", "c", "d"]
    assert rank.mean_abs == sorted(rank.mean_abs, reverse=True)
    per = explain_dataset(model, X[:3], bg, ShapConfig(target="per_class"))
    assert per.values.shape == (3, 3, 4)


def test_summary_ties_by_name_and_zero_feature():
    from ransomxai.explain import ShapArray
    vals = np.zeros((2, 1, 3))
    vals[:, 0, 1] = [1.0, -1.0]
    arr = ShapArray(vals, np.zeros((2, 1)), np.zeros((2, 1)), ["z", "m", "a"])
    rank = summarize(arr, top_k=3)
    assert rank.features == ["m", "a", "z"]
    assert summarize(arr, top_k=1).features == ["m"]
    back = SummaryRanking.from_csv(rank.to_csv())
    assert back.features == rank.features and back.mean_abs == rank.mean_abs


def test_rf_explain_uses_tree_path():
    model, rng = forest_model(4, M=3, n_trees=4)
    X = rng.uniform(size=(4, 3))
    bg = rng.uniform(size=(5, 3))
    shap = explain_dataset(model, X, bg, ShapConfig())
    for r in range(4):
        base, phi = tree_shap_small(model, X[r], bg)
        assert np.array_equal(shap.values[r, 0], phi)
