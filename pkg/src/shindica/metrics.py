"""Amari distance, optimal assignment and mean cross-correlation."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .datamodel import DataError

MAX_CONDITION = 1e12
ROUNDOFF = 64 * np.finfo(np.float64).eps


def amari_distance(A, B, normalize: bool = False) -> float:
    """Amari distance between invertible square ``A`` and ``B``.

    With ``C = A^{-1} B``::

        sum_i (sum_j |c_ij| / max_k |c_ik| - 1) + sum_j (sum_i |c_ij| / max_k |c_kj| - 1)

    It vanishes exactly when ``C`` is a scaled permutation.  Entries of ``C``
    below ``64 n eps cond(A)`` times their column maximum are within the
    forward error of the solve and are treated as zero, so this also holds
    in floating point.  ``normalize=True``
    divides by ``2 n (n - 1)``, its largest possible value, giving a number in
    [0, 1] that is comparable across dimensions.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise DataError("Amari distance needs two square matrices of equal shape")
    conds = []
    for M in (A, B):
        conds.append(np.linalg.cond(M) if np.isfinite(M).all() else np.inf)
        if conds[-1] > MAX_CONDITION:
            raise DataError("Amari distance needs invertible matrices")
    C = np.abs(np.linalg.solve(A, B))
    # entries within the forward error of the solve count as exact zeros
    C[C <= ROUNDOFF * A.shape[0] * conds[0] * C.max(axis=0)] = 0.0
    rows = np.sum(C.sum(axis=1) / C.max(axis=1) - 1.0)
    cols = np.sum(C.sum(axis=0) / C.max(axis=0) - 1.0)
    dist = float(rows + cols)
    n = A.shape[0]
    if normalize:
        return dist / (2.0 * n * (n - 1)) if n > 1 else 0.0
    return dist


def hungarian(cost):
    """Minimum-cost assignment of an ``n x m`` cost matrix.

    Returns
    -------
    pairs : list of (row, col)
        ``min(n, m)`` pairs sorted by row.
    total : float
    """
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2 or C.size == 0:
        raise DataError("cost matrix must be a non-empty 2-d array")
    if not np.isfinite(C).all():
        raise DataError("cost matrix must be finite")
    if C.shape[0] <= C.shape[1]:
        cols = _kernels.hungarian_assign(C)
        pairs = [(i, int(j)) for i, j in enumerate(cols)]
    else:
        rows = _kernels.hungarian_assign(C.T)
        pairs = sorted((int(i), j) for j, i in enumerate(rows))
    total = float(sum(C[i, j] for i, j in pairs))
    return pairs, total


def correlation_matrix(X, Y) -> np.ndarray:
    """Pearson correlations between the rows of ``X`` and the rows of ``Y``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    sx = np.linalg.norm(Xc, axis=1)
    sy = np.linalg.norm(Yc, axis=1)
    if np.any(sx == 0) or np.any(sy == 0):
        raise DataError("zero-variance row")
    return np.clip((Xc / sx[:, None]) @ (Yc / sy[:, None]).T, -1.0, 1.0)


def mcc(estimated, truth):
    """Mean absolute correlation after optimal one-to-one matching.

    Returns ``(score, pairs)`` where ``pairs`` maps estimated rows to true rows.
    """
    E = np.atleast_2d(np.asarray(estimated, dtype=np.float64))
    T = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if E.shape[0] != T.shape[0]:
        raise DataError("estimated and true sources need the same number of rows")
    if E.shape[1] != T.shape[1]:
        raise DataError("estimated and true sources need the same number of samples")
    corr = np.abs(correlation_matrix(E, T))
    pairs, _ = hungarian(1.0 - corr)
    return float(np.mean([corr[i, j] for i, j in pairs])), pairs
