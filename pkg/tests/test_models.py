from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipcpred.dataset import Dataset, FeatureVector, LabeledSample, Scaler, fit_scaler, normalize_dataset
from ipcpred.errors import (
    DatasetError,
    ModelFormatError,
    RegimeMismatchError,
    UnsupportedVersionError,
    WidthMismatchError,
)
from ipcpred.models import (
    ForestParams,
    ForestPayload,
    LinearPayload,
    PredictorModel,
    Tree,
    dumps_model,
    fit,
    fit_forest,
    fit_linear,
    fit_svr,
    load_model,
    loads_model,
    predict,
    raw_coefficients,
    save_model,
)
from ipcpred.models.forest import tree_sample
from ipcpred.models.svr import svr_objective
from ipcpred.synth import GeneratorConfig, OracleParams, generate

FIXTURES = Path(__file__).parent / "fixtures" / "models"


def planted(n=50, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-5, 5, size=(n, 2))
    y = 2 * X[:, 0] - 3 * X[:, 1] + 0.5
    return X, y


def leaf_tree(value, n=1):
    return Tree(
        np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([value]), np.array([n]),
        np.array([0.0]),
    )


def audit_tree(tree, X, y, idx):
    """Replay routing of the training rows and check every structural invariant."""
    routed = {0: np.asarray(idx)}
    for k in range(tree.n_nodes):
        rows = routed[k]
        assert tree.n_samples[k] == len(rows)
        if tree.feature[k] == -1:
            assert tree.value[k] == np.mean(y[rows])
            continue
        l, r = tree.left[k], tree.right[k]
        assert l > k and r > k
        assert tree.impurity_decrease[k] >= 0
        mask = X[rows, tree.feature[k]] <= tree.threshold[k]
        routed[l], routed[r] = rows[mask], rows[~mask]
        assert tree.n_samples[k] == len(routed[l]) + len(routed[r])
    assert set(routed) == set(range(tree.n_nodes))


@pytest.fixture(scope="module")
def oracle_split():
    ds = generate(GeneratorConfig(n_samples=600, seed=11), OracleParams(sigma=0.02, seed=11))
    return ds.subset(range(400)), ds.subset(range(400, 600))


# --- linear -------------------------------------------------------------------


def test_ols_recovers_planted_coefficients():
    X, y = planted()
    model = fit_linear(X, y)
    intercept, coefs = raw_coefficients(model)
    assert not model.train_meta["ridge_fallback"]
    assert np.max(np.abs(coefs - [2, -3])) < 1e-8
    assert abs(intercept - 0.5) < 1e-8


def test_ols_constant_target():
    X, _ = planted()
    model = fit_linear(X, np.full(50, 1.7))
    assert np.all(np.abs(model.payload.coefficients) < 1e-10)
    assert model.payload.intercept == pytest.approx(1.7, abs=1e-12)


def test_ols_duplicate_column_falls_back_to_ridge():
    X, y = planted()
    X = np.column_stack([X[:, 0], X[:, 0], X[:, 1]])
    model = fit_linear(X, y)
    assert model.train_meta["ridge_fallback"]
    pred = predict(model, X)
    assert np.all(np.isfinite(pred))
    assert np.max(np.abs(pred - y)) < 1e-4


def test_ols_rejects_bad_input():
    with pytest.raises(DatasetError):
        fit_linear(np.empty((0, 2)), np.empty(0))
    X, y = planted()
    X[3, 1] = np.nan
    with pytest.raises(DatasetError):
        fit_linear(X, y)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 60), st.integers(1, 4))
def test_ols_residuals_orthogonal_to_design(seed, n_extra, p):
    rng = np.random.default_rng(seed)
    n = p + 1 + n_extra
    X = rng.normal(size=(n, p)) * rng.uniform(0.1, 100, size=p)
    y = X @ rng.normal(size=p) + rng.normal(size=n)
    model = fit_linear(X, y)
    A = np.hstack([np.ones((n, 1)), model.scaler.transform(X)])
    resid = y - predict(model, X)
    assert np.max(np.abs(A.T @ resid)) <= 1e-6 * n * np.max(np.abs(y))


def test_linear_prediction_arithmetic():
    model = PredictorModel("linear", ("x1", "x2"), Scaler.identity(2), LinearPayload(0.5, (2.0, -3.0)))
    assert predict(model, [1.0, 1.0]) == -0.5


# --- SVR ----------------------------------------------------------------------


def test_svr_fits_noiseless_linear_data():
    X, y = planted(200, seed=3)
    y = y / 10
    model = fit_svr(X, y, epsilon=0.01, seed=1)
    rmse = np.sqrt(np.mean((predict(model, X) - y) ** 2))
    assert rmse < 0.02


def test_svr_wide_tube_gives_zero_weights():
    X, y = planted(100)
    y = 1.0 + 1e-3 * y / np.abs(y).max()
    eps = 2 * (y.max() - y.min())
    model = fit_svr(X, y, epsilon=eps, seed=2)
    w = np.array(model.payload.weights)
    assert np.linalg.norm(w) < 1e-3
    Z = model.scaler.transform(X)
    loss = svr_objective(w, model.payload.bias, Z, y - y.mean(), eps, model.payload.lam)
    assert abs(loss - 0.0) < 1e-6


def test_svr_same_seed_bit_identical():
    X, y = planted(80)
    a = fit_svr(X, y, seed=5, epochs=20)
    b = fit_svr(X, y, seed=5, epochs=20)
    assert a.payload == b.payload
    c = fit_svr(X, y, seed=6, epochs=20)
    assert c.payload != a.payload


def test_svr_parameter_validation():
    X, y = planted(10)
    with pytest.raises(ValueError):
        fit_svr(X, y, epsilon=-1)
    with pytest.raises(ValueError):
        fit_svr(X, y, lam=0)


@pytest.mark.xfail(
    strict=True,
    reason="with the prescribed step schedule eta0/(1+lam*eta0*t) and lam=1e-4 the step barely decays, "
    "so the epoch-end objective of the stochastic iterate keeps fluctuating",
)
def test_svr_epoch_objective_non_increasing_after_warmup(oracle_split):
    train, _ = oracle_split
    model = fit_svr(train, seed=7)
    h = np.array(model.train_meta["objective_history"])
    assert np.all(np.diff(h[10:]) <= 1e-6)


# --- forest -------------------------------------------------------------------


def test_single_full_tree_memorizes_distinct_rows(oracle_split):
    train, _ = oracle_split
    model = fit_forest(train, params=ForestParams(n_trees=1, bootstrap=False, seed=3))
    assert np.array_equal(predict(model, train), train.y)


def test_constant_target_gives_single_leaves():
    X, _ = planted(40)
    model = fit_forest(X, np.full(40, 0.8), ForestParams(n_trees=5, seed=0))
    assert all(t.n_nodes == 1 and t.value[0] == 0.8 for t in model.payload.trees)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 40))
def test_forest_prediction_within_target_range(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, 3)).astype(float)
    y = rng.uniform(0.1, 2.0, size=n)
    model = fit_forest(X, y, ForestParams(n_trees=7, seed=seed))
    probe = rng.uniform(-2, 6, size=(50, 3))
    pred = predict(model, probe)
    assert np.all(pred >= y.min()) and np.all(pred <= y.max())


@pytest.mark.parametrize("params", [ForestParams(n_trees=4, seed=1),
                                    ForestParams(n_trees=3, min_samples_leaf=5, max_depth=6, seed=2),
                                    ForestParams(n_trees=2, bootstrap=False, min_samples_split=10, seed=3)])
def test_forest_structural_audit(oracle_split, params):
    train, _ = oracle_split
    X, y = train.X, train.y
    model = fit_forest(train, params=params)
    resolved = model.payload.params
    for t, tree in enumerate(model.payload.trees):
        idx, _ = tree_sample(resolved, t, len(y))
        audit_tree(tree, X, y, idx)
        if params.max_depth is not None:
            depth = {0: 0}
            for k in range(tree.n_nodes):
                if tree.feature[k] != -1:
                    depth[tree.left[k]] = depth[tree.right[k]] = depth[k] + 1
            assert max(depth.values()) <= params.max_depth
        leaves = tree.feature == -1
        assert np.all(tree.n_samples[leaves] >= params.min_samples_leaf)


def test_forest_tie_break_prefers_lowest_feature():
    # both columns separate the targets identically; feature 0 must win
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    y = np.array([1.0, 2.0, 1.0, 2.0])
    model = fit_forest(X, y, ForestParams(n_trees=3, bootstrap=False, max_features=2, seed=9))
    for tree in model.payload.trees:
        assert tree.feature[0] == 0 and tree.threshold[0] == 0.5


def test_forest_threads_do_not_change_payload(oracle_split):
    train, _ = oracle_split
    params = ForestParams(n_trees=8, seed=4)
    a = fit_forest(train, params=params, threads=1)
    b = fit_forest(train, params=params, threads=4)
    assert dumps_model(a) == dumps_model(b)


def test_forest_default_max_features(oracle_split):
    train, _ = oracle_split
    model = fit_forest(train, params=ForestParams(n_trees=1, seed=0))
    assert model.payload.params.max_features == 3


def test_ensemble_error_non_increasing_in_tree_count(oracle_split):
    train, test = oracle_split
    mse = {}
    for k in (1, 10, 100):
        model = fit_forest(train, params=ForestParams(n_trees=k, seed=21))
        mse[k] = np.mean((predict(model, test) - test.y) ** 2)
    assert mse[10] <= 1.05 * mse[1]
    assert mse[100] <= 1.05 * mse[10]


def test_forest_of_two_leaves_averages():
    payload = ForestPayload((leaf_tree(1.0), leaf_tree(3.0)), ForestParams(n_trees=2, max_features=1))
    model = PredictorModel("forest", ("a",), None, payload)
    assert predict(model, [123.0]) == 2.0
    assert predict(model, np.array([[0.0], [-5.0]])).tolist() == [2.0, 2.0]


# --- predict contract ---------------------------------------------------------


def test_width_mismatch(oracle_split):
    train, _ = oracle_split
    X = train.X[:, :8]
    model = fit_linear(X, train.y)
    with pytest.raises(WidthMismatchError):
        predict(model, train.X[0])


def test_regime_mismatch(oracle_split):
    train, _ = oracle_split
    model = fit_linear(train)
    with pytest.raises(RegimeMismatchError):
        predict(model, normalize_dataset(train))
    with pytest.raises(RegimeMismatchError):
        predict(model, train.X, normalized=True)
    normalized_model = fit_linear(normalize_dataset(train))
    assert normalized_model.normalized
    predict(normalized_model, normalize_dataset(train))


def test_fit_dispatch(oracle_split):
    train, _ = oracle_split
    assert fit("forest", train, seed=1, n_trees=2).kind == "forest"
    assert fit("svr", train, seed=1, epochs=2).kind == "svr"
    assert fit("linear", train).kind == "linear"
    with pytest.raises(ValueError):
        fit("knn", train)


# --- persistence --------------------------------------------------------------


@pytest.mark.parametrize("kind", ["linear", "svr", "forest"])
def test_save_load_round_trip(tmp_path, oracle_split, kind):
    train, test = oracle_split
    hyper = {"forest": {"n_trees": 5}, "svr": {"epochs": 5}, "linear": {}}[kind]
    model = fit(kind, train, seed=3, **hyper)
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    assert np.array_equal(predict(loaded, test), predict(model, test))
    save_model(loaded, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_golden_linear_model_file():
    text = (FIXTURES / "linear_v1.json").read_text()
    model = loads_model(text)
    assert model.kind == "linear" and model.feature_names == ("x1", "x2")
    assert predict(model, [1.0, 1.0]) == -0.5
    assert dumps_model(model) == text


def test_unsupported_schema_version():
    text = (FIXTURES / "linear_v1.json").read_text().replace('"schema_version": 1', '"schema_version": 999')
    with pytest.raises(UnsupportedVersionError):
        loads_model(text)


def test_truncated_file_is_parse_error(tmp_path, oracle_split):
    train, _ = oracle_split
    text = dumps_model(fit_forest(train, params=ForestParams(n_trees=2)))
    with pytest.raises(ModelFormatError):
        loads_model(text[: len(text) // 2])


def test_payload_kind_mismatch():
    text = (FIXTURES / "linear_v1.json").read_text().replace('"kind": "linear"', '"kind": "svr"')
    with pytest.raises(ModelFormatError):
        loads_model(text)


def test_width_disagreement_rejected():
    text = (FIXTURES / "linear_v1.json").read_text().replace('[2.0, -3.0]', '[2.0, -3.0, 1.0]')
    with pytest.raises(ModelFormatError):
        loads_model(text)


def test_tree_with_backward_child_rejected(oracle_split):
    import json

    train, _ = oracle_split
    doc = json.loads(dumps_model(fit_forest(train, params=ForestParams(n_trees=1))))
    doc["payload"]["trees"][0]["left"][0] = 0
    with pytest.raises(ModelFormatError):
        loads_model(json.dumps(doc))
