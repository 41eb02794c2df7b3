"""Negated whitened joint log-likelihood and its Euclidean gradient.

For orthogonal ``W_d`` acting on whitened views ``X_d``, with ``Z_d = W_d X_d``
split into a shared block ``Z_d0`` (first ``c`` rows) and an individual block
``Z_d1``, the minimized quantity is::

    F = -sum g(mean_d Z_d0) - sum_d sum g(Z_d1)
        - lam / (2 D) * sum_{d, l} trace(Z_d0 Z_l0^T)

where ``g`` is the log-density surrogate (``-log cosh`` or ``exp(-s^2/2)``).
Terms that are constant on the orthogonal group (log-determinants and the
per-view shared-block traces in the Gaussian part) are left out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .datamodel import NONLINEARITIES, DataError, orthogonality_error

EVAL_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class ObjectiveConfig:
    shared_count: int = 0
    lam: float = 1.0
    nonlinearity: str = "logcosh"

    def __post_init__(self):
        if self.shared_count < 0:
            raise DataError("shared_count must be non-negative")
        if not self.lam > 0:
            raise DataError("lambda must be positive")
        if self.nonlinearity not in NONLINEARITIES:
            raise DataError(f"nonlinearity must be one of {NONLINEARITIES}")


@dataclass(frozen=True)
class SourceEstimates:
    z: tuple
    shared_count: int

    @property
    def z_shared(self) -> list:
        return [z[: self.shared_count] for z in self.z]

    @property
    def z_individual(self) -> list:
        return [z[self.shared_count :] for z in self.z]

    @property
    def shared_mean(self) -> np.ndarray:
        return np.mean(self.z_shared, axis=0)


def lam_from_sigma(sigma: float) -> float:
    """Lagrange weight ``(1 + sigma^2) / sigma^2`` for a noise level ``sigma``."""
    return (1.0 + sigma**2) / sigma**2


def nonlinearity_g(s: float, kind: str = "logcosh"):
    """Scalar ``(g(s), g'(s))``; overflow-safe for logcosh."""
    if kind == "logcosh":
        a = abs(s)
        return -(a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)), -math.tanh(s)
    if kind == "gauss":
        e = math.exp(-0.5 * s * s)
        return e, -s * e
    raise DataError(f"unknown nonlinearity {kind!r}")


def score(Z, kind):
    """Matrix version: ``(sum g(Z), g'(Z))`` through the active kernel backend."""
    if kind == "logcosh":
        return _kernels.logcosh(Z)
    return _kernels.gauss(Z)


def _validate(weights, data, cfg, check_orthogonal):
    if len(weights) != len(data) or not weights:
        raise DataError("need one weight matrix per view")
    n = data[0].shape[1]
    for d, (W, X) in enumerate(zip(weights, data)):
        r = X.shape[0]
        if W.shape != (r, r):
            raise DataError(f"view {d}: weight shape {W.shape} does not match data rows {r}")
        if X.shape[1] != n:
            raise DataError("views must share the sample count")
        if cfg.shared_count > r:
            raise DataError("shared_count exceeds a view dimension")
        if check_orthogonal and orthogonality_error(W) > EVAL_ORTHO_TOL:
            raise DataError(f"non-orthogonal weights for view {d}")


def value_and_gradient(weights, data, cfg: ObjectiveConfig, need_grad=True, check=True):
    """Return ``(value, gradients or None, SourceEstimates)``."""
    weights = [np.asarray(W, dtype=np.float64) for W in weights]
    data = [np.asarray(X, dtype=np.float64) for X in data]
    if check:
        _validate(weights, data, cfg, check_orthogonal=True)
    D, c = len(data), cfg.shared_count
    Z = [W @ X for W, X in zip(weights, data)]
    value = 0.0
    if c > 0:
        total0 = np.sum([z[:c] for z in Z], axis=0)
        gv, gd = score(total0 / D, cfg.nonlinearity)
        # sum_{d,l} trace(Z_d0 Z_l0^T) = ||sum_d Z_d0||_F^2
        value -= gv + cfg.lam / (2.0 * D) * float(np.sum(total0 * total0))
        shared_grad = -gd / D - (cfg.lam / D) * total0
    grads = [] if need_grad else None
    for W, X, z in zip(weights, data, Z):
        M = np.empty_like(z)
        if z.shape[0] > c:
            iv, idd = score(z[c:], cfg.nonlinearity)
            value -= iv
            M[c:] = -idd
        if c > 0:
            M[:c] = shared_grad
        if need_grad:
            grads.append(M @ X.T)
    return float(value), grads, SourceEstimates(tuple(Z), c)


def evaluate(weights, data, cfg: ObjectiveConfig):
    """Negated objective (to be minimized) and the source estimates."""
    value, _, sources = value_and_gradient(weights, data, cfg, need_grad=False)
    return value, sources


def gradient(weights, data, cfg: ObjectiveConfig) -> list:
    """Euclidean gradient of the negated objective w.r.t. each unconstrained ``W_d``."""
    return value_and_gradient(weights, data, cfg)[1]
