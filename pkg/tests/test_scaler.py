import numpy as np
import pytest

from mdrobustness.classifiers.scaler import (
    CLASS_NAMES,
    ScalerParams,
    apply_scaler,
    decode_labels,
    encode_labels,
    fit_scaler,
)
from mdrobustness.signal_chain.ingest import TargetClass


def test_two_point_column():
    params = fit_scaler(np.array([[0.0], [2.0]]))
    assert params.means.tolist() == [1.0]
    assert params.stds.tolist() == [1.0]
    assert apply_scaler(params, np.array([[2.0]])).tolist() == [[1.0]]


def test_constant_column_maps_to_zero():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    params = fit_scaler(X)
    assert params.constant.tolist() == [False, True]
    Z = apply_scaler(params, np.array([[2.0, 5.0], [0.0, 9.0]]))
    assert Z[:, 1].tolist() == [0.0, 0.0]


def test_fitted_rows_are_centred():
    X = np.random.default_rng(0).normal(3.0, 2.0, (50, 4))
    Z = apply_scaler(fit_scaler(X), X)
    assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1.0)


def test_scaler_rejects_bad_shapes():
    with pytest.raises(ValueError, match="at least 2 rows"):
        fit_scaler(np.ones((1, 3)))
    params = fit_scaler(np.random.default_rng(1).normal(size=(5, 3)))
    with pytest.raises(ValueError, match="expected 3 feature columns"):
        apply_scaler(params, np.ones((2, 4)))


def test_scaler_params_dict_round_trip():
    params = fit_scaler(np.array([[1.0, 4.0], [3.0, 4.0]]))
    restored = ScalerParams.from_dict(params.to_dict())
    assert np.array_equal(restored.means, params.means)
    assert np.array_equal(restored.constant, params.constant)


class TestLabelEncoding:
    def test_lexicographic(self):
        assert encode_labels(["drone", "bird"]).tolist() == [1, 0]
        assert CLASS_NAMES == ("bird", "drone", "reflector")

    def test_enum_and_strings_agree(self):
        assert encode_labels([TargetClass.REFLECTOR, "reflector"]).tolist() == [2, 2]

    def test_idempotent_and_decodes(self):
        labels = ["reflector", "bird", "drone", "bird"]
        ids = encode_labels(labels)
        assert encode_labels(decode_labels(ids)).tolist() == ids.tolist()
        assert decode_labels(ids) == labels

    def test_empty(self):
        with pytest.raises(ValueError):
            encode_labels([])
