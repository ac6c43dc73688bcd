"""RBF activations and locally weighted linear features.

A local model is parameterised by a center ``c`` and per-dimension length
scales ``lam``.  The activation of a point ``x`` is::

    eta(x) = exp(-0.5 * sum_j (x_j - c_j)**2 / lam_j**2)

and its feature vector is ``eta(x) * [(x - c), 1]`` with pruned entries zeroed.
Length scales are kept as a vector; the diagonal metric is never formed.
"""
import numpy as np

from .errors import ContractViolation, InvalidParameterError

LAMBDA_FLOOR = 1e-3


def _check(x, center, scale):
    center = np.asarray(center, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if center.ndim != 1 or scale.shape != center.shape:
        raise ContractViolation(
            f"center shape {center.shape} and scale shape {scale.shape} disagree")
    if x.shape[-1] != center.shape[0]:
        raise ContractViolation(
            f"input dimension {x.shape[-1]} != model dimension {center.shape[0]}")
    if not np.all(scale > 0):
        raise InvalidParameterError("length scales must be positive")
    return center, scale


def rbf_weights(X, center, scale):
    """Activations of every row of ``X`` (shape N x d) -> shape (N,)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    center, scale = _check(X, center, scale)
    z = (X - center) / scale
    return np.exp(-0.5 * np.einsum("ij,ij->i", z, z))


def rbf_weight(x, center, scale):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractViolation("rbf_weight expects a single point")
    return float(rbf_weights(x[None, :], center, scale)[0])


def feature_matrix(X, center, scale, mask=None):
    """Weighted local features for each row of ``X``; shape (N, d + 1).

    ``mask`` is a boolean vector of length d + 1.  Masked (pruned) columns
    are exactly zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    center, scale = _check(X, center, scale)
    d = center.shape[0]
    eta = rbf_weights(X, center, scale)
    Phi = np.empty((X.shape[0], d + 1))
    Phi[:, :d] = (X - center) * eta[:, None]
    Phi[:, d] = eta
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (d + 1,):
            raise ContractViolation(f"mask must have length {d + 1}")
        Phi[:, ~mask] = 0.0
    return Phi


def feature_vector(x, center, scale, mask=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractViolation("feature_vector expects a single point")
    return feature_matrix(x[None, :], center, scale, mask)[0]
