"""Per-view PCA whitening."""

from __future__ import annotations

import numpy as np

from .datamodel import DataError, WhiteningTransform

EIGEN_FLOOR = 1e-12


def _resolve_retain(retain, eigenvalues):
    k = eigenvalues.shape[0]
    if retain is None:
        return k
    if isinstance(retain, (int, np.integer)) and not isinstance(retain, bool):
        r = int(retain)
        if not 1 <= r <= k:
            raise DataError(f"retain={r} must lie in [1, {k}]")
        return r
    frac = float(retain)
    if not 0 < frac <= 1:
        raise DataError("a variance fraction must lie in (0, 1]")
    pos = np.clip(eigenvalues, 0, None)
    cum = np.cumsum(pos) / pos.sum()
    return int(min(k, np.searchsorted(cum, frac - 1e-12) + 1))


def fit_whitening(view, retain=None) -> WhiteningTransform:
    """Fit ``K = diag(ev[:r])^(-1/2) U[:, :r]^T`` on a ``k x N`` view.

    Parameters
    ----------
    view : ndarray, shape (k, N)
    retain : int, float or None
        An explicit number of components, a variance fraction in (0, 1], or
        None for all ``k`` components.

    The covariance is normalized by 1/N.  Each eigenvector is signed so that
    its largest-magnitude entry is positive.
    """
    X = np.asarray(view, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("view must be a 2-d array")
    k, n = X.shape
    if n < 2:
        raise DataError("whitening needs at least 2 samples")
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    cov = Xc @ Xc.T / n
    ev, U = np.linalg.eigh(cov)
    order = np.argsort(ev)[::-1]
    ev, U = ev[order], U[:, order]
    idx = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[idx, np.arange(k)])
    r = _resolve_retain(retain, ev)
    floor = max(EIGEN_FLOOR, ev[0] * k * np.finfo(float).eps)
    if ev[r - 1] <= floor:
        rank = int(np.sum(ev > floor))
        raise DataError(f"rank deficiency: requested {r} components but covariance rank is {rank}")
    Ur, er = U[:, :r], ev[:r]
    forward = Ur.T / np.sqrt(er)[:, None]
    inverse = Ur * np.sqrt(er)[None, :]
    return WhiteningTransform(forward=forward, inverse=inverse, mean=mean, eigenvalues=ev)


def apply_whitening(t: WhiteningTransform, view) -> np.ndarray:
    X = np.asarray(view, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != t.input_dim:
        raise DataError(f"expected {t.input_dim} features, got shape {X.shape}")
    return t.forward @ (X - t.mean[:, None])


def invert_whitening(t: WhiteningTransform, Z) -> np.ndarray:
    """Map whitened data back to the feature space (projection onto the retained subspace)."""
    return t.inverse @ np.asarray(Z) + t.mean[:, None]
