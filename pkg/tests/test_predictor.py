import numpy as np
import pytest

from batch_hblr.dataset import Dataset
from batch_hblr.errors import ContractViolation, InvalidInputError
from batch_hblr.predictor import (
    evaluate,
    mse,
    predict_averaged,
    predict_distribution,
    predict_many,
    predict_point,
)
from batch_hblr.segmentation import Segment, SegmentedModel
from batch_hblr.trainer import BatchModel, HyperParams, LocalModel

PARAMS = HyperParams()


def _model(center, mean, beta=4.0, cov=None, scale=1.0):
    d = len(center)
    return LocalModel(np.array(center, float), np.full(d, scale), np.array(mean, float),
                      np.zeros((d + 1, d + 1)) if cov is None else np.array(cov, float),
                      np.ones(d + 1), beta, np.ones(d + 1, dtype=bool))


def test_zero_weights():
    batch = BatchModel([_model([0.0], [0, 0], 4.0), _model([1.0], [0, 0], 2.0)], 1)
    pd = predict_point([0.3], batch, PARAMS)
    assert pd.mean == 0.0
    assert pd.variance == pytest.approx(1e-9 + 0.25 + 0.5)


def test_far_field():
    batch = BatchModel([_model([0.0], [2.0, 5.0], 4.0, cov=np.eye(2))], 1)
    pd = predict_point([100.0], batch, PARAMS)
    assert abs(pd.mean) < 1e-12
    assert pd.variance == pytest.approx(1e-9 + 0.25)


def test_single_model_hand_value():
    cov = [[0.1, 0.02], [0.02, 0.3]]
    batch = BatchModel([_model([0.0], [2.0, 5.0], 4.0, cov=cov, scale=0.5)], 1)
    x = 0.5
    eta = np.exp(-0.5)
    phi = np.array([x * eta, eta])
    pd = predict_point([x], batch, PARAMS)
    assert pd.mean == pytest.approx(2.0 * phi[0] + 5.0 * phi[1])
    assert pd.variance == pytest.approx(1e-9 + 0.25 + phi @ np.array(cov) @ phi)


def test_point_dimension_mismatch():
    batch = BatchModel([_model([0.0], [1, 1])], 1)
    with pytest.raises(ContractViolation):
        predict_point([0.0, 1.0], batch, PARAMS)


def _segment(lo, hi):
    return Segment(0, 1, np.array([lo], float), np.array([hi], float), "none")


def _constant_batch(value):
    # a single wide model whose output is ~value near the origin
    return BatchModel([_model([0.0], [0.0, value], scale=1e6)], 1)


def _two_segment_model():
    segs = [_segment(0.0, 2.0), _segment(1.0, 3.0)]
    return SegmentedModel(segs, [[_constant_batch(1.0)], [_constant_batch(3.0)]], PARAMS)


def test_single_active_segment():
    assert predict_averaged([0.5], _two_segment_model())[0] == pytest.approx(1.0)


def test_two_active_segments_average():
    assert predict_averaged([1.5], _two_segment_model())[0] == pytest.approx(2.0)


def test_fallback_to_nearest_segment():
    assert predict_averaged([10.0], _two_segment_model())[0] == pytest.approx(3.0)


def test_distribution_returns_first_segment_variance():
    means, var = predict_distribution([1.5], _two_segment_model())
    assert means[0] == pytest.approx(2.0)
    assert var[0] == pytest.approx(1e-9 + 0.25)


def test_predict_many_matches_single(msd_model, msd_split):
    _, test = msd_split
    X = test.inputs[:20]
    many = predict_many(X, msd_model)
    for i, x in enumerate(X):
        np.testing.assert_allclose(many[i], predict_averaged(x, msd_model), rtol=1e-12)


def test_evaluate_perfect():
    model = SegmentedModel([_segment(-1.0, 1.0)], [[_constant_batch(1.0)]], PARAMS)
    X = np.array([[0.0], [0.1]])
    preds = predict_many(X, model)
    data = Dataset(X, preds)
    assert evaluate(data, model, "mse").values[0] == 0.0
    res = evaluate(Dataset(X, np.column_stack([preds[:, 0] + [0, 1e-3]])), model, "nmse")
    assert res.ms_per_query > 0


def test_evaluate_zero_variance_advises_mse():
    model = SegmentedModel([_segment(-1.0, 1.0)], [[_constant_batch(1.0)]], PARAMS)
    data = Dataset(np.array([[0.0], [0.5]]), np.array([2.0, 2.0]))
    with pytest.raises(InvalidInputError, match="--metric mse"):
        evaluate(data, model, "nmse")
    assert evaluate(data, model, "mse").values[0] > 0


def test_mse():
    assert mse([0.0, 2.0], [1.0, 1.0]) == 1.0


def test_variance_floor_on_msd(msd_model, msd_split):
    _, test = msd_split
    for x in test.inputs[:50]:
        _, var = predict_distribution(x, msd_model)
        assert np.all(var >= 1 / PARAMS.beta_y)
