"""Predictive distribution of a fitted model and test-set metrics."""
import time
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidInputError
from .segmentation import segments_containing
from .trainer import training_nmse as nmse


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: float
    variance: float


def predict_point(x, model, params):
    """Mean and variance of the response at ``x`` under one ``BatchModel``.

    ``x`` must already be in the model's (normalised) input coordinates.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ContractViolation(
            f"query has shape {x.shape}, model expects ({model.input_dim},)")
    mean = 0.0
    variance = 1.0 / params.beta_y
    for m in model.models:
        phi = m.features(x[None, :])[0]
        mean += float(phi @ m.mean)
        variance += 1.0 / m.beta_f_hat + float(phi @ m.covariance @ phi)
    return PredictiveDistribution(mean, variance)


def _check_query(x, seg_model):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != seg_model.input_dim:
        raise ContractViolation(
            f"query has {x.size} values, model expects {seg_model.input_dim}")
    return x


def predict_averaged(x, seg_model):
    """Mean prediction per response, averaged over the segments holding ``x``."""
    x = _check_query(x, seg_model)
    active = segments_containing(x, seg_model.segments)
    out = np.zeros(seg_model.response_dim)
    for s in active:
        z = seg_model.segments[s].normalize(x)
        for j, batch in enumerate(seg_model.batch_models[s]):
            out[j] += batch.predict_mean(z[None, :])[0]
    return out / len(active)


def predict_distribution(x, seg_model):
    """Averaged means plus the variance of the first active segment.

    Variances are not combined across segments.
    """
    x = _check_query(x, seg_model)
    s = segments_containing(x, seg_model.segments)[0]
    z = seg_model.segments[s].normalize(x)
    var = np.array([predict_point(z, b, seg_model.params).variance
                    for b in seg_model.batch_models[s]])
    return predict_averaged(x, seg_model), var


def predict_many(X, seg_model):
    """Vectorised ``predict_averaged`` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != seg_model.input_dim:
        raise ContractViolation(
            f"inputs have {X.shape[1]} columns, model expects {seg_model.input_dim}")
    if len(seg_model.segments) == 1:
        seg = seg_model.segments[0]
        Z = seg.normalize(X)
        return np.column_stack([b.predict_mean(Z) for b in seg_model.batch_models[0]])
    return np.vstack([predict_averaged(x, seg_model) for x in X])


def mse(y, y_pre):
    return float(np.mean((np.asarray(y, dtype=float) - y_pre) ** 2))


METRICS = {"nmse": nmse, "mse": mse}


@dataclass
class EvaluationResult:
    metric: str
    values: np.ndarray
    predictions: np.ndarray
    ms_per_query: float


def evaluate(test, seg_model, metric="nmse", timed=True):
    """Score ``seg_model`` on ``test`` for every response column.

    When ``timed`` each row is predicted on its own so the reported
    per-query time reflects single-query latency.
    """
    if len(test) == 0:
        raise InvalidInputError("test set is empty")
    if metric not in METRICS:
        raise InvalidInputError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    if test.input_dim != seg_model.input_dim or test.response_dim != seg_model.response_dim:
        raise ContractViolation(
            f"data has {test.input_dim} inputs/{test.response_dim} responses, model "
            f"expects {seg_model.input_dim}/{seg_model.response_dim}")
    if metric == "nmse":
        for j in range(test.response_dim):
            if not np.var(test.responses[:, j]) > 0:
                raise InvalidInputError(
                    f"response {test.response_names[j]!r} has zero variance; "
                    "nMSE is undefined, use --metric mse")
    if timed:
        preds = np.empty_like(test.responses)
        start = time.perf_counter()
        for i, x in enumerate(test.inputs):
            preds[i] = predict_averaged(x, seg_model)
        elapsed = time.perf_counter() - start
        ms = 1000.0 * elapsed / len(test)
    else:
        preds = predict_many(test.inputs, seg_model)
        ms = float("nan")
    fn = METRICS[metric]
    values = np.array([fn(test.responses[:, j], preds[:, j]) for j in range(test.response_dim)])
    return EvaluationResult(metric, values, preds, ms)
