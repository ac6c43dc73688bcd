"""Closed-form variational updates for the local models.

The weight, alpha and beta factors are local to one model; the hidden-target
factor couples all models through the shared scalar ``s`` and must run as a
barrier before the per-model updates of a sweep.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ContractViolation, NumericalFailure

MAX_JITTER_DOUBLINGS = 8


@dataclass(frozen=True)
class WeightPosterior:
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class GammaPosterior:
    shape: float
    rate: float

    @property
    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class HiddenTargets:
    """Posterior over the per-model hidden targets for one sweep.

    ``mu_f`` is N x M; ``sigma_f`` holds the M diagonal variances, which do
    not depend on the sample.  ``s`` and ``y_pre`` are the shared scalars the
    update was computed from.
    """
    mu_f: np.ndarray
    sigma_f: np.ndarray
    s: float
    y_pre: np.ndarray


def update_weight_posterior(Phi, ef, alpha_hat, beta_hat, eps, model_index=None):
    """Gaussian posterior of one model's weights.

    Solves ``((1 + eps) diag(alpha_hat) + beta_hat Phi^T Phi) Sigma = I`` by
    Cholesky.  If the factorisation fails the jitter is doubled, at most
    ``MAX_JITTER_DOUBLINGS`` times, before giving up.
    """
    Phi = np.asarray(Phi, dtype=float)
    ef = np.asarray(ef, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    P = alpha_hat.shape[0]
    if Phi.ndim != 2 or Phi.shape[1] != P or Phi.shape[0] != ef.shape[0]:
        raise ContractViolation(
            f"Phi {Phi.shape}, targets {ef.shape} and alpha {alpha_hat.shape} disagree")
    if P == 0:
        return WeightPosterior(np.zeros(0), np.zeros((0, 0)))

    gram = beta_hat * (Phi.T @ Phi)
    rhs = beta_hat * (Phi.T @ ef)
    jitter = eps
    for _ in range(MAX_JITTER_DOUBLINGS + 1):
        precision = gram + np.diag((1.0 + jitter) * alpha_hat)
        try:
            factor = linalg.cho_factor(precision, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            jitter = 2.0 * jitter if jitter > 0 else np.finfo(float).eps
            continue
        cov = linalg.cho_solve(factor, np.eye(P))
        cov = 0.5 * (cov + cov.T)
        mean = linalg.cho_solve(factor, rhs)
        if np.all(np.isfinite(cov)) and np.all(np.isfinite(mean)):
            return WeightPosterior(mean, cov)
        break
    raise NumericalFailure("weight precision is not positive definite",
                           model_index=model_index)


def update_alpha_posterior(weight_mean, weight_var, a0, b0):
    """Gamma posterior of the weight precisions.

    Works elementwise; pass vectors to update every feature of a model at
    once.  The shape does not depend on the data.
    """
    weight_mean = np.asarray(weight_mean, dtype=float)
    weight_var = np.asarray(weight_var, dtype=float)
    rate = b0 + 0.5 * (weight_mean ** 2 + weight_var)
    if rate.ndim == 0:
        return GammaPosterior(a0 + 0.5, float(rate))
    return GammaPosterior(a0 + 0.5, rate)


def update_beta_posterior(mu_f, Phi, weight_mean, weight_cov, sigma_f, a0, b0):
    """Gamma posterior of one model's hidden-target precision."""
    mu_f = np.asarray(mu_f, dtype=float)
    N = mu_f.shape[0]
    if N == 0:
        return GammaPosterior(a0, b0)
    Phi = np.asarray(Phi, dtype=float)
    resid = mu_f - Phi @ weight_mean
    trace = np.einsum("ij,jk,ik->i", Phi, weight_cov, Phi)
    rate = b0 + 0.5 * float(np.sum(resid ** 2 + sigma_f + trace))
    if not np.isfinite(rate) or rate <= 0:
        raise NumericalFailure(f"beta rate is {rate}")
    return GammaPosterior(a0 + 0.5 * N, rate)


def update_hidden_targets(Y, predictions, beta_hats, beta_y):
    """Posterior of the hidden targets given every model's current fit.

    ``predictions`` is N x M (model m's mean prediction at sample n).  Each
    model receives the share ``beta_m^-1 / s`` of the joint residual.
    """
    Y = np.asarray(Y, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    beta_hats = np.asarray(beta_hats, dtype=float)
    if predictions.ndim != 2 or predictions.shape != (Y.shape[0], beta_hats.shape[0]):
        raise ContractViolation(
            f"predictions {predictions.shape} do not match N={Y.shape[0]}, "
            f"M={beta_hats.shape[0]}")
    if not np.all(beta_hats > 0) or beta_y <= 0:
        raise ContractViolation("precisions must be positive")
    inv_beta = 1.0 / beta_hats
    s = 1.0 / beta_y + float(np.sum(inv_beta))
    y_pre = predictions.sum(axis=1)
    sigma_f = inv_beta - inv_beta ** 2 / s
    mu_f = predictions + np.outer(Y - y_pre, inv_beta / s)
    return HiddenTargets(mu_f, sigma_f, s, y_pre)


def hidden_target_covariance(beta_hats, beta_y):
    """Full M x M hidden-target covariance via Sherman-Morrison.

    Equals ``inv(beta_y * 1 1^T + diag(beta_hats))`` without forming the
    inverse.
    """
    inv_beta = 1.0 / np.asarray(beta_hats, dtype=float)
    s = 1.0 / beta_y + inv_beta.sum()
    return np.diag(inv_beta) - np.outer(inv_beta, inv_beta) / s


def prune_features(alpha_hat, threshold):
    """Features with precision strictly below ``threshold`` stay active."""
    return np.asarray(alpha_hat, dtype=float) < threshold
