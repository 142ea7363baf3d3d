"""Tree-ensemble classifiers against scikit-learn references and SAMME math."""

import json
import math

import numpy as np
import pytest
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.tree import DecisionTreeClassifier

from botdetect.errors import InputError
from botdetect.models.ensembles import (
    classifier_from_json,
    classifier_to_json,
    fit_adaboost,
    fit_gradient_boosting,
    fit_random_forest,
    load_classifier,
    save_classifier,
)
from botdetect.seeds import derived_int


def binary_data(seed, n=90, d=6):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(X[:, 0] * X[:, 1] > 0, "pos", "neg")
    return X, list(y)


def multiclass_data(seed, n_per=35):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, 1.2, size=(n_per, 4))
                   for c in (0.0, 3.0, 6.0)])
    y = ["a"] * n_per + ["b"] * n_per + ["c"] * n_per
    return X, y


def encode(y, classes):
    return np.array([classes.index(v) for v in y])


# ------------------------------------------------------------ random forest

def test_random_forest_proba_matches_sklearn():
    X, y = binary_data(1)
    model = fit_random_forest(X, y, n_trees=25, seed=5)
    classes = sorted(set(y))
    reference = RandomForestClassifier(
        n_estimators=25, max_features=max(1, math.ceil(math.sqrt(X.shape[1]))),
        n_jobs=1, random_state=derived_int(5))
    reference.fit(X, encode(y, classes))
    assert model.classes == tuple(classes)
    assert np.allclose(model.predict_proba(X), reference.predict_proba(X),
                       atol=1e-12, rtol=0)


def test_random_forest_multiclass_matches_sklearn():
    X, y = multiclass_data(2)
    model = fit_random_forest(X, y, n_trees=15, seed=3)
    reference = RandomForestClassifier(
        n_estimators=15, max_features=2, n_jobs=1, random_state=derived_int(3))
    reference.fit(X, encode(y, sorted(set(y))))
    assert np.allclose(model.predict_proba(X), reference.predict_proba(X),
                       atol=1e-12, rtol=0)


def test_random_forest_predict_returns_class_names():
    X, y = binary_data(3)
    model = fit_random_forest(X, y, n_trees=10, seed=1)
    pred = model.predict(X)
    assert set(pred.tolist()) <= {"neg", "pos"}
    accuracy = (pred == np.array(y)).mean()
    assert accuracy > 0.95            # training accuracy of a forest


def test_random_forest_seed_changes_model():
    X, y = binary_data(4)
    a = fit_random_forest(X, y, n_trees=8, seed=1).predict_proba(X)
    b = fit_random_forest(X, y, n_trees=8, seed=1).predict_proba(X)
    c = fit_random_forest(X, y, n_trees=8, seed=2).predict_proba(X)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# -------------------------------------------------------- gradient boosting

def test_gradient_boosting_binary_matches_sklearn():
    X, y = binary_data(5)
    model = fit_gradient_boosting(X, y, rounds=40, depth=3, rate=0.1, seed=7)
    reference = GradientBoostingClassifier(n_estimators=40, max_depth=3,
                                           learning_rate=0.1,
                                           random_state=derived_int(7))
    reference.fit(X, encode(y, sorted(set(y))))
    assert np.allclose(model.predict_proba(X), reference.predict_proba(X),
                       atol=1e-10, rtol=0)


def test_gradient_boosting_multiclass_matches_sklearn():
    X, y = multiclass_data(6)
    model = fit_gradient_boosting(X, y, rounds=20, depth=2, rate=0.2, seed=9)
    reference = GradientBoostingClassifier(n_estimators=20, max_depth=2,
                                           learning_rate=0.2,
                                           random_state=derived_int(9))
    reference.fit(X, encode(y, sorted(set(y))))
    assert np.allclose(model.predict_proba(X), reference.predict_proba(X),
                       atol=1e-10, rtol=0)


def test_gradient_boosting_zero_rate_is_prior_model():
    X, y = binary_data(7)
    model = fit_gradient_boosting(X, y, rounds=30, rate=0.0, seed=0)
    assert model.trees == []
    p1 = y.count("pos") / len(y)
    proba = model.predict_proba(X[:5])
    assert np.allclose(proba, [[1 - p1, p1]] * 5, atol=1e-12)
    X3, y3 = multiclass_data(8)
    prior_model = fit_gradient_boosting(X3, y3, rounds=0, seed=0)
    expected = np.array([y3.count(c) for c in sorted(set(y3))]) / len(y3)
    assert np.allclose(prior_model.predict_proba(X3[:4]),
                       np.tile(expected, (4, 1)), atol=1e-12)


# ----------------------------------------------------------------- adaboost

def manual_samme(X, y, rounds, seed):
    """Independent SAMME loop over the same scikit-learn stumps."""
    classes = sorted(set(y))
    y_enc = encode(y, classes)
    k = len(classes)
    n = len(y_enc)
    w = np.full(n, 1.0 / n)
    alphas, errors = [], []
    for m in range(rounds):
        stump = DecisionTreeClassifier(max_depth=1, random_state=derived_int(seed, m))
        stump.fit(X, y_enc, sample_weight=w)
        pred = stump.predict(X)
        wrong = pred != y_enc
        err = float(w[wrong].sum() / w.sum())
        if err >= 1.0 - 1.0 / k:
            break
        if err == 0.0:
            alphas.append(1.0)
            errors.append(err)
            break
        alpha = math.log((1 - err) / err) + math.log(k - 1.0)
        alphas.append(alpha)
        errors.append(err)
        w = w * np.exp(alpha * wrong)
        w = w / w.sum()
    return alphas, errors


def test_adaboost_alphas_match_manual_samme():
    X, y = binary_data(9)
    model = fit_adaboost(X, y, rounds=12, seed=4)
    expected_alphas, errors = manual_samme(X, y, rounds=12, seed=4)
    assert model.alphas == pytest.approx(expected_alphas, rel=1e-12)
    assert all(a > 0 for a in model.alphas)
    assert all(e < 0.5 for e in errors)


def test_adaboost_multiclass_alphas_match_manual_samme():
    X, y = multiclass_data(10)
    model = fit_adaboost(X, y, rounds=8, seed=6)
    expected_alphas, _ = manual_samme(X, y, rounds=8, seed=6)
    assert model.alphas == pytest.approx(expected_alphas, rel=1e-12)


def test_adaboost_perfect_stump_stops_with_unit_weight():
    X = np.arange(10.0)[:, None]
    y = ["lo"] * 5 + ["hi"] * 5
    model = fit_adaboost(X, y, rounds=50, seed=0)
    assert len(model.stumps) == 1
    assert model.alphas == [1.0]
    assert (model.predict(X) == np.array(y)).all()


def test_adaboost_unlearnable_data_falls_back_to_priors():
    # XOR labels: no depth-1 split beats random guessing, so boosting stops
    # before accepting any stump and predictions fall back to class priors.
    # Row count is a power of two so the weighted error is exactly 0.5.
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 4)
    y = (["same", "diff", "diff", "same"] * 4)
    model = fit_adaboost(X, y, rounds=10, seed=0)
    assert model.stumps == []
    proba = model.predict_proba(X[:2])
    assert np.allclose(proba, 0.5)


def test_adaboost_proba_rows_normalized():
    X, y = multiclass_data(11)
    model = fit_adaboost(X, y, rounds=10, seed=2)
    proba = model.predict_proba(X)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert (proba >= 0).all()


# ---------------------------------------------------------- shared behavior

@pytest.mark.parametrize("fit", [
    lambda X, y: fit_random_forest(X, y, n_trees=6, seed=1),
    lambda X, y: fit_gradient_boosting(X, y, rounds=8, seed=1),
    lambda X, y: fit_adaboost(X, y, rounds=8, seed=1),
])
def test_single_class_rejected(fit):
    X = np.zeros((10, 3))
    with pytest.raises(InputError, match="at least 2 classes"):
        fit(X, ["only"] * 10)


@pytest.mark.parametrize("fit", [
    lambda X, y: fit_random_forest(X, y, n_trees=7, seed=2),
    lambda X, y: fit_gradient_boosting(X, y, rounds=10, depth=2, seed=2),
    lambda X, y: fit_adaboost(X, y, rounds=10, seed=2),
])
def test_json_round_trip_preserves_predictions(fit, tmp_path):
    X, y = multiclass_data(12)
    model = fit(X, y)
    path = tmp_path / "model.json"
    save_classifier(model, str(path), provenance={"tool": "botdetect"})
    doc = json.loads(path.read_text())
    assert doc["format"] == 1
    assert doc["provenance"] == {"tool": "botdetect"}
    back = load_classifier(str(path))
    assert back.classes == model.classes
    assert np.array_equal(back.predict_proba(X), model.predict_proba(X))


def test_classifier_json_validation():
    X, y = binary_data(13)
    doc = classifier_to_json(fit_random_forest(X, y, n_trees=3, seed=0))
    bad_format = dict(doc, format=99)
    with pytest.raises(InputError, match="unsupported model format"):
        classifier_from_json(bad_format)
    bad_kind = dict(doc, kind="svm")
    with pytest.raises(InputError, match="unknown classifier kind"):
        classifier_from_json(bad_kind)


def test_load_classifier_rejects_bad_json(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{nope")
    with pytest.raises(InputError, match="not valid JSON"):
        load_classifier(str(path))
