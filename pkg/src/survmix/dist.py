"""Closed-form probability kernels.

Diagonal Gaussians, the right-censored Weibull log-likelihood, entropies,
and numerically stable log-domain reductions. Everything here is pure and
vectorized over leading axes.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def softplus(x):
    """log(1 + exp(x)), stable for large |x|."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def softplus_grad(x):
    """Derivative of softplus, i.e. the logistic sigmoid."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def log_gaussian_diag(z, mean, var):
    """Log density of a diagonal Gaussian, summed over the last axis."""
    z = np.asarray(z, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0.0):
        raise DomainError("variances must be strictly positive")
    return -0.5 * np.sum(
        np.log(2.0 * np.pi * var) + (z - mean) ** 2 / var, axis=-1
    )


def gaussian_entropy_diag(var):
    """Differential entropy of a diagonal Gaussian: J/2 log(2πe) + ½Σ log σ²."""
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0.0):
        raise DomainError("variances must be strictly positive")
    j = var.shape[-1]
    return 0.5 * j * np.log(2.0 * np.pi * np.e) + 0.5 * np.sum(np.log(var), axis=-1)


def log_weibull_censored(t, event, scale, shape):
    """Right-censored Weibull log-likelihood.

    event=1 rows contribute the log density, event=0 rows the log
    survival function. scale/shape broadcast against t.
    """
    t = np.asarray(t, dtype=float)
    event = np.asarray(event, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("times must be strictly positive")
    if np.any(scale <= 0.0) or shape <= 0.0:
        raise DomainError("Weibull scale and shape must be positive")
    log_ratio = np.log(t) - np.log(scale)
    log_density_part = np.log(shape) - np.log(scale) + (shape - 1.0) * log_ratio
    log_survival = -np.exp(shape * log_ratio)
    return event * log_density_part + log_survival


def weibull_median(scale, shape):
    """Median of a Weibull distribution: scale * (ln 2)^(1/shape)."""
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0.0) or shape <= 0.0:
        raise DomainError("Weibull scale and shape must be positive")
    return scale * np.log(2.0) ** (1.0 / shape)


def log_sum_exp(v, axis=-1):
    """log Σ exp(v) along an axis, computed with a max shift."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise DomainError("log_sum_exp of an empty array")
    vmax = np.max(v, axis=axis, keepdims=True)
    out = vmax + np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def softmax(v, axis=-1):
    """Stable softmax along an axis."""
    v = np.asarray(v, dtype=float)
    vmax = np.max(v, axis=axis, keepdims=True)
    e = np.exp(v - vmax)
    return e / e.sum(axis=axis, keepdims=True)
