import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batch_hblr.errors import InvalidInputError, InvalidParameterError
from batch_hblr.features import LAMBDA_FLOOR
from batch_hblr.trainer import (
    HyperParams,
    LocalModel,
    fit_batch,
    gradient_ascent_step,
    initialize_local_models,
    length_scale_gradient,
    length_scale_objective,
    training_nmse,
)


def test_default_hyperparams():
    p = HyperParams()
    assert (p.a0_alpha, p.b0_alpha, p.a0_beta, p.b0_beta) == (1e-6,) * 4
    assert (p.beta_y, p.w_gen, p.lambda_init, p.kappa) == (1e9, 0.5, 0.3, 1e-4)
    assert (p.eps, p.delta, p.max_iters, p.prune_threshold) == (1e-10, 1e-4, 200, 1000.0)


@pytest.mark.parametrize("override", [
    {"beta_y": 0.0}, {"w_gen": 1.0}, {"w_gen": 0.0}, {"kappa": -1.0},
    {"max_iters": -1}, {"lambda_init": -0.3},
])
def test_invalid_hyperparams(override):
    with pytest.raises(InvalidParameterError):
        HyperParams(**override)


def test_unknown_override_rejected():
    with pytest.raises(InvalidParameterError):
        HyperParams().updated(learning_rate=1.0)


def test_init_single_sample():
    models = initialize_local_models(np.array([[0.2, 0.4]]), HyperParams())
    assert len(models) == 1
    np.testing.assert_array_equal(models[0].center, [0.2, 0.4])


def test_init_identical_samples():
    assert len(initialize_local_models(np.ones((50, 3)), HyperParams())) == 1


def test_init_threshold_example():
    models = initialize_local_models(np.array([[0.0], [0.1], [0.5]]), HyperParams())
    assert [m.center[0] for m in models] == [0.0, 0.5]


def test_init_fresh_model_state():
    p = HyperParams()
    m = initialize_local_models(np.zeros((1, 2)), p)[0]
    np.testing.assert_array_equal(m.scale, [0.3, 0.3])
    np.testing.assert_array_equal(m.alpha_hat, [1.0, 1.0, 1.0])
    assert m.beta_f_hat == 1.0
    assert not m.mean.any() and not m.covariance.any()
    assert m.active_mask.all()


def test_init_empty():
    with pytest.raises(InvalidInputError):
        initialize_local_models(np.zeros((0, 2)), HyperParams())


def test_init_brute_force_oracle(rng):
    X = rng.uniform(0, 1, size=(200, 2))
    p = HyperParams()
    centers = [X[0]]
    for x in X[1:]:
        if all(np.exp(-0.5 * np.sum(((x - c) / 0.3) ** 2)) < 0.5 for c in centers):
            centers.append(x)
    got = [m.center for m in initialize_local_models(X, p)]
    np.testing.assert_array_equal(np.array(got), np.array(centers))


def test_nmse_perfect():
    assert training_nmse([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]) == 0.0


def test_nmse_of_mean_predictor_is_one():
    Y = np.array([0.3, -1.0, 2.5, 4.0])
    assert training_nmse(Y, np.full(4, Y.mean())) == pytest.approx(1.0)


def test_nmse_hand_value():
    assert training_nmse([0.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0)


def test_nmse_zero_variance():
    with pytest.raises(InvalidInputError, match="MSE"):
        training_nmse([1.0, 1.0], [1.0, 1.0])


def test_linear_target_is_recovered(rng):
    X = rng.uniform(0, 0.2, size=(200, 1))
    Y = 2.0 * X[:, 0] + 0.5
    params = HyperParams(lambda_init=10.0)
    batch = fit_batch(X, Y, params)
    assert len(batch.models) == 1
    assert batch.training_nmse_trace[-1] < 1e-3


def test_max_iters_zero_returns_initial_models(rng):
    X = rng.uniform(size=(30, 2))
    batch = fit_batch(X, rng.normal(size=30), HyperParams(max_iters=0))
    assert batch.training_nmse_trace == [] and batch.iterations_used == 0
    assert all(not m.mean.any() for m in batch.models)


def test_stops_on_delta_or_cap(rng):
    X = rng.uniform(size=(100, 1))
    Y = np.sin(6 * X[:, 0]) + 0.05 * rng.normal(size=100)
    batch = fit_batch(X, Y, HyperParams(max_iters=5))
    assert batch.iterations_used <= 5
    batch = fit_batch(X, Y, HyperParams())
    tr = batch.training_nmse_trace
    assert len(tr) == batch.iterations_used
    if batch.iterations_used < 200:
        assert abs(tr[-1] - tr[-2]) <= 1e-4


def test_stochastic_lambda_runs(rng):
    X = rng.uniform(size=(60, 1))
    Y = np.sin(6 * X[:, 0])
    batch = fit_batch(X, Y, HyperParams(stochastic_lambda=True))
    assert np.isfinite(batch.training_nmse_trace[-1])


def test_pruned_weights_exactly_zero(rng):
    X = rng.uniform(size=(300, 2))
    Y = 3 * X[:, 0] + 0.01 * rng.normal(size=300)
    batch = fit_batch(X, Y, HyperParams())
    for m in batch.models:
        assert np.all(m.mean[~m.active_mask] == 0.0)
        assert np.all(m.covariance[~m.active_mask] == 0.0)
        assert np.all(m.covariance[:, ~m.active_mask] == 0.0)


def _random_model(rng, d):
    P = d + 1
    return LocalModel(center=rng.normal(size=d), scale=rng.uniform(0.5, 2.0, size=d),
                      mean=rng.normal(size=P), covariance=np.zeros((P, P)),
                      alpha_hat=np.ones(P), beta_f_hat=rng.uniform(0.5, 5.0),
                      active_mask=np.ones(P, dtype=bool))


def test_gradient_zero_residual(rng):
    m = _random_model(rng, 2)
    X = rng.normal(size=(10, 2))
    g = length_scale_gradient(m, X, m.predict(X))
    np.testing.assert_allclose(g, 0.0, atol=1e-14)
    assert g.shape == (2,)


def _fd_gradient(m, X, mu_f, h=1e-5):
    g = np.empty_like(m.scale)
    base = m.scale.copy()
    for j in range(base.size):
        vals = []
        for sgn in (1, -1):
            m.scale = base.copy()
            m.scale[j] += sgn * h
            vals.append(length_scale_objective(m, X, mu_f))
        g[j] = (vals[0] - vals[1]) / (2 * h)
    m.scale = base
    return g


def test_gradient_one_dimensional_hand_instance():
    m = LocalModel(np.array([0.0]), np.array([0.8]), np.array([1.5, -0.4]), np.zeros((2, 2)),
                   np.ones(2), 2.0, np.ones(2, dtype=bool))
    X = np.array([[0.6]])
    mu_f = np.array([0.9])
    np.testing.assert_allclose(length_scale_gradient(m, X, mu_f), _fd_gradient(m, X, mu_f),
                               rtol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 50), st.integers(0, 2 ** 32 - 1))
def test_gradient_matches_finite_differences(d, N, seed):
    rng = np.random.default_rng(seed)
    m = _random_model(rng, d)
    X = m.center + rng.normal(size=(N, d))
    mu_f = rng.normal(size=N)
    g = length_scale_gradient(m, X, mu_f)
    fd = _fd_gradient(m, X, mu_f)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8 * max(1.0, np.abs(fd).max()))


def test_step_zero_gradient_unchanged():
    np.testing.assert_array_equal(gradient_ascent_step([0.3, 0.4], [0.0, 0.0], 1e-4), [0.3, 0.4])


def test_step_clamps_at_floor():
    np.testing.assert_array_equal(gradient_ascent_step([0.3], [-1e6], 1e-4), [LAMBDA_FLOOR])


def test_step_uses_kappa():
    np.testing.assert_allclose(gradient_ascent_step([0.3], [2.0], 1e-4), [0.3002])


def test_kappa_zero_freezes_scales(rng):
    X = rng.uniform(size=(80, 2))
    batch = fit_batch(X, X[:, 0] ** 2, HyperParams(kappa=0.0))
    for m in batch.models:
        np.testing.assert_array_equal(m.scale, 0.3)
