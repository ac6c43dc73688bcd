"""Batch training of a set of local Bayesian linear models by variational EM."""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, NumericalFailure
from .features import LAMBDA_FLOOR, feature_matrix, rbf_weights
from .posterior import (
    prune_features,
    update_alpha_posterior,
    update_beta_posterior,
    update_hidden_targets,
    update_weight_posterior,
)


@dataclass(frozen=True)
class HyperParams:
    a0_alpha: float = 1e-6
    b0_alpha: float = 1e-6
    a0_beta: float = 1e-6
    b0_beta: float = 1e-6
    beta_y: float = 1e9
    w_gen: float = 0.5
    lambda_init: float = 0.3
    kappa: float = 1e-4
    eps: float = 1e-10
    delta: float = 1e-4
    max_iters: int = 200
    prune_threshold: float = 1000.0
    # one full-batch length-scale step per sweep unless set
    stochastic_lambda: bool = False

    def __post_init__(self):
        for name in ("a0_alpha", "b0_alpha", "a0_beta", "b0_beta", "beta_y",
                     "lambda_init", "eps", "delta", "prune_threshold"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be non-negative")
        if not 0 < self.w_gen < 1:
            raise InvalidParameterError("w_gen must lie in (0, 1)")
        if self.max_iters < 0:
            raise InvalidParameterError("max_iters must be non-negative")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def updated(self, **overrides):
        unknown = set(overrides) - set(self.field_names())
        if unknown:
            raise InvalidParameterError(f"unknown hyperparameter(s): {sorted(unknown)}")
        return replace(self, **overrides)


@dataclass
class LocalModel:
    """One receptive field.

    ``mean`` and ``covariance`` are full length d + 1; rows and columns of
    pruned features are held at exactly zero.
    """
    center: np.ndarray
    scale: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    alpha_hat: np.ndarray
    beta_f_hat: float
    active_mask: np.ndarray

    @property
    def n_features(self):
        return self.center.shape[0] + 1

    def features(self, X):
        return feature_matrix(X, self.center, self.scale, self.active_mask)

    def predict(self, X):
        return self.features(X) @ self.mean


@dataclass
class BatchModel:
    models: list
    input_dim: int
    training_nmse_trace: list = field(default_factory=list)
    iterations_used: int = 0

    def design(self, X):
        return [m.features(X) for m in self.models]

    def predict_mean(self, X):
        X = np.atleast_2d(X)
        out = np.zeros(X.shape[0])
        for m in self.models:
            out += m.predict(X)
        return out


def _new_model(x, params):
    d = x.shape[0]
    P = d + 1
    return LocalModel(
        center=np.array(x, dtype=float),
        scale=np.full(d, params.lambda_init),
        mean=np.zeros(P),
        covariance=np.zeros((P, P)),
        alpha_hat=np.full(P, params.a0_alpha / params.b0_alpha),
        beta_f_hat=params.a0_beta / params.b0_beta,
        active_mask=np.ones(P, dtype=bool),
    )


def initialize_local_models(X, params):
    """Allocate receptive fields in one pass over the samples.

    A sample becomes a new center when its activation under every existing
    model is below ``w_gen``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise InvalidInputError("cannot initialise local models from an empty input")
    d = X.shape[1]
    scale = np.full(d, params.lambda_init)
    centers = np.empty_like(X)
    centers[0] = X[0]
    M = 1
    # all models share lambda_init here, so one squared-distance test suffices
    thresh = -2.0 * np.log(params.w_gen)
    for n in range(1, X.shape[0]):
        z = (centers[:M] - X[n]) / scale
        if np.all(np.einsum("ij,ij->i", z, z) > thresh):
            centers[M] = X[n]
            M += 1
    return [_new_model(c, params) for c in centers[:M]]


def training_nmse(Y, y_pre):
    """Mean squared error normalised by the population variance of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    var = np.var(Y)
    if not var > 0:
        raise InvalidInputError("nMSE is undefined for a zero-variance response; use MSE")
    return float(np.mean((Y - np.asarray(y_pre)) ** 2) / var)


def length_scale_objective(model, X, mu_f, beta_f=None):
    """Expected hidden-target log-likelihood terms that depend on the scales."""
    beta_f = model.beta_f_hat if beta_f is None else beta_f
    r = mu_f - model.features(X) @ model.mean
    return -0.5 * beta_f * float(r @ r)


def length_scale_gradient(model, X, mu_f, beta_f=None):
    """Analytic derivative of ``length_scale_objective`` w.r.t. the scales.

    With ``r = mu_f - mean . phi`` and ``d eta / d lam_j = eta (x_j-c_j)^2 / lam_j^3``
    the derivative is ``beta * sum_n r_n eta_n (xi_n . mean) (x-c)^2 / lam^3``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    beta_f = model.beta_f_hat if beta_f is None else beta_f
    diff = X - model.center
    eta = rbf_weights(X, model.center, model.scale)
    mask = model.active_mask
    w = model.mean
    xi_dot_w = diff @ (w[:-1] * mask[:-1]) + (w[-1] if mask[-1] else 0.0)
    r = mu_f - eta * xi_dot_w
    coef = r * eta * xi_dot_w
    return beta_f * (coef @ diff ** 2) / model.scale ** 3


def gradient_ascent_step(scale, grad, kappa):
    return np.maximum(np.asarray(scale, dtype=float) + kappa * np.asarray(grad),
                      LAMBDA_FLOOR)


def _update_scale(model, X, mu_f, params):
    if params.kappa == 0:
        return
    if not params.stochastic_lambda:
        grad = length_scale_gradient(model, X, mu_f)
        model.scale = gradient_ascent_step(model.scale, grad, params.kappa)
        return
    for n in range(X.shape[0]):
        grad = length_scale_gradient(model, X[n:n + 1], mu_f[n:n + 1])
        model.scale = gradient_ascent_step(model.scale, grad, params.kappa)


def em_sweep(models, X, Y, params, sweep=None):
    """One pass of variational EM over all local models, in place."""
    N = X.shape[0]
    predictions = np.column_stack([m.predict(X) for m in models])
    betas = np.array([m.beta_f_hat for m in models])
    hidden = update_hidden_targets(Y, predictions, betas, params.beta_y)

    for k, m in enumerate(models):
        act = m.active_mask
        Phi = m.features(X)[:, act]
        try:
            post = update_weight_posterior(Phi, hidden.mu_f[:, k], m.alpha_hat[act],
                                           m.beta_f_hat, params.eps, model_index=k)
        except NumericalFailure as exc:
            raise NumericalFailure("weight update failed", model_index=k, sweep=sweep) from exc
        mean = np.zeros(m.n_features)
        cov = np.zeros((m.n_features, m.n_features))
        mean[act] = post.mean
        cov[np.ix_(act, act)] = post.covariance

        beta_post = update_beta_posterior(hidden.mu_f[:, k], Phi, post.mean, post.covariance,
                                          hidden.sigma_f[k], params.a0_beta, params.b0_beta)
        alpha_post = update_alpha_posterior(post.mean, np.diag(post.covariance),
                                            params.a0_alpha, params.b0_alpha)
        m.mean = mean
        m.covariance = cov
        m.beta_f_hat = beta_post.mean
        alpha = m.alpha_hat.copy()
        alpha[act] = alpha_post.mean
        m.alpha_hat = alpha

        _update_scale(m, X, hidden.mu_f[:, k], params)

        keep = act & prune_features(m.alpha_hat, params.prune_threshold)
        if not np.array_equal(keep, act):
            m.active_mask = keep
            m.mean = np.where(keep, m.mean, 0.0)
            m.covariance = m.covariance * np.outer(keep, keep)
        if not (np.all(np.isfinite(m.mean)) and np.isfinite(m.beta_f_hat)
                and np.all(np.isfinite(m.scale))):
            raise NumericalFailure("non-finite posterior", model_index=k, sweep=sweep)
    return hidden


def fit_batch(X, Y, params=HyperParams(), models=None):
    """Fit the local models to one batch and return a ``BatchModel``.

    Sweeps stop when the training nMSE changes by at most ``params.delta``
    or after ``params.max_iters`` sweeps.  ``models`` may supply a
    pre-initialised set (they are modified in place).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if models is None:
        models = initialize_local_models(X, params)
    batch = BatchModel(models=models, input_dim=X.shape[1])
    prev = None
    for t in range(1, params.max_iters + 1):
        em_sweep(models, X, Y, params, sweep=t)
        nmse = training_nmse(Y, batch.predict_mean(X))
        batch.training_nmse_trace.append(nmse)
        batch.iterations_used = t
        if prev is not None and abs(nmse - prev) <= params.delta:
            break
        prev = nmse
    return batch
