"""Scaling, the two imputation strategies, and the 2-D embedding."""

import logging

import numpy as np
import pytest

from botdetect.features.build import FeatureMatrix
from botdetect.models.preprocess import (
    Preprocessor,
    fit_preprocessor,
    matrix_to_array,
)


def test_matrix_to_array_maps_missing_to_nan():
    matrix = FeatureMatrix(addresses=("a", "b"), names=("x", "y"),
                           values=((1.0, None), (None, 4.0)))
    A = matrix_to_array(matrix)
    assert A.shape == (2, 2)
    assert A[0, 0] == 1.0 and A[1, 1] == 4.0
    assert np.isnan(A[0, 1]) and np.isnan(A[1, 0])
    passthrough = np.array([[1.0, 2.0]])
    assert np.array_equal(matrix_to_array(passthrough), passthrough)


def test_minmax_scales_columns_to_unit_interval():
    A = np.array([[0.0, 10.0], [5.0, 20.0], [10.0, 30.0]])
    p = fit_preprocessor(A, kind="minmax")
    out = p.transform(A)
    assert np.allclose(out, [[0, 0], [0.5, 0.5], [1, 1]])
    assert np.allclose(out.min(axis=0), 0)
    assert np.allclose(out.max(axis=0), 1)


def test_standardize_scales_to_zero_mean_unit_std():
    rng = np.random.default_rng(3)
    A = rng.normal(loc=5, scale=9, size=(40, 4))
    p = fit_preprocessor(A, kind="standardize")
    out = p.transform(A)
    assert np.allclose(out.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(out.std(axis=0), 1, atol=1e-12)


def test_transform_uses_fit_statistics_only():
    train = np.array([[0.0], [10.0]])
    p = fit_preprocessor(train, kind="minmax")
    assert np.allclose(p.transform(np.array([[20.0]])), [[2.0]])
    assert np.allclose(p.transform(np.array([[-10.0]])), [[-1.0]])


def test_constant_columns_map_to_zero():
    A = np.array([[7.0, 1.0], [7.0, 2.0], [7.0, 3.0]])
    for kind in ("minmax", "standardize"):
        out = fit_preprocessor(A, kind=kind).transform(A)
        assert np.all(out[:, 0] == 0.0)


def test_mean_imputation_lands_on_column_mean_position():
    # column values 0, 10 with one missing cell: mean 5 scales to 0.5
    A = np.array([[0.0], [10.0], [np.nan]])
    p = fit_preprocessor(A, kind="minmax", imputation="mean")
    out = p.transform(A)
    assert out[2, 0] == pytest.approx(0.5)
    # under standardization the imputed cell sits exactly at 0 (the mean)
    q = fit_preprocessor(A, kind="standardize", imputation="mean")
    assert q.transform(A)[2, 0] == pytest.approx(0.0, abs=1e-15)


def test_constant_imputation_marks_missing_after_scaling():
    A = np.array([[0.0], [10.0], [np.nan]])
    p = fit_preprocessor(A, kind="minmax", imputation="constant")
    out = p.transform(A)
    assert out[2, 0] == -1.0
    assert out[0, 0] == 0.0 and out[1, 0] == 1.0
    # fit statistics ignore the missing cell entirely
    assert p.shift_[0] == 0.0 and p.scale_[0] == 10.0


def test_mean_imputation_shifts_fit_statistics():
    # with mean imputation the filled column participates in min/max
    A = np.array([[0.0], [np.nan], [10.0], [30.0]])
    p = fit_preprocessor(A, kind="minmax", imputation="mean")
    assert p.impute_mean_[0] == pytest.approx(40 / 3)
    assert p.shift_[0] == 0.0
    assert p.scale_[0] == 30.0


def test_all_missing_column_warns_and_scales_to_zero(caplog):
    A = np.array([[np.nan, 1.0], [np.nan, 2.0]])
    with caplog.at_level(logging.WARNING, logger="botdetect.models"):
        p = fit_preprocessor(A, kind="minmax", imputation="mean")
    assert any("all-missing" in r.message for r in caplog.records)
    out = p.transform(A)
    assert np.all(out[:, 0] == 0.0)
    assert not np.isnan(out).any()


def test_embedding_produces_two_ordered_components():
    rng = np.random.default_rng(5)
    base = rng.normal(size=(60, 2)) * np.array([10.0, 1.0])
    A = base @ rng.normal(size=(2, 7))          # rank-2 data in 7 columns
    p = fit_preprocessor(A, kind="standardize", embed=True)
    out = p.transform(A)
    assert out.shape == (60, 2)
    assert p.n_output_columns == 2
    # components are orthonormal rows and explain variance in order
    C = p.embed_components_
    assert np.allclose(C @ C.T, np.eye(2), atol=1e-10)
    assert out[:, 0].var() >= out[:, 1].var()


def test_embedding_sign_rule_makes_fit_deterministic():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(30, 5))
    p = fit_preprocessor(A, kind="minmax", embed=True)
    for i in range(2):
        j = int(np.argmax(np.abs(p.embed_components_[i])))
        assert p.embed_components_[i, j] > 0
    q = fit_preprocessor(A, kind="minmax", embed=True)
    assert np.array_equal(p.embed_components_, q.embed_components_)
    assert np.array_equal(p.transform(A), q.transform(A))


def test_embedding_of_rank_one_data_pads_second_component():
    A = np.tile(np.arange(5.0)[:, None], (1, 1))   # single column
    p = fit_preprocessor(A, kind="minmax", embed=True)
    out = p.transform(A)
    assert out.shape == (5, 2)
    assert np.allclose(out[:, 1], 0.0)


def test_fit_validation_errors():
    with pytest.raises(ValueError, match="kind"):
        fit_preprocessor(np.ones((2, 2)), kind="robust")
    with pytest.raises(ValueError, match="imputation"):
        fit_preprocessor(np.ones((2, 2)), imputation="median")
    with pytest.raises(ValueError, match="empty"):
        fit_preprocessor(np.empty((0, 3)))


def test_transform_rejects_wrong_width():
    p = fit_preprocessor(np.ones((3, 2)) * np.arange(2))
    with pytest.raises(ValueError, match="expected 2 columns"):
        p.transform(np.ones((3, 5)))


def test_scenario_matrix_preprocesses_clean(scenario_chain):
    from botdetect.features.build import build_feature_matrix
    addresses = sorted(scenario_chain.all_senders())[:20]
    matrix = build_feature_matrix(scenario_chain, addresses)
    for kind in ("minmax", "standardize"):
        for imputation in ("mean", "constant"):
            p = fit_preprocessor(matrix, kind=kind, imputation=imputation)
            out = p.transform(matrix)
            assert out.shape == (20, 68)
            assert np.isfinite(out).all()
