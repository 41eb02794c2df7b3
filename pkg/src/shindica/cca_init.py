"""CCA initialization of the orthogonal unmixing matrices.

Two views use the SVD of the cross-covariance.  More views use the MAXVAR
generalization: the top eigenvectors of the stacked ``(sum r_d) x (sum r_d)``
covariance of the whitened views, split into per-view blocks and
orthonormalized with a positive-diagonal QR.  Either way the rows come out
ordered by decreasing canonical correlation, so the candidates for shared
components sit at the top of every matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import DataError

WHITE_TOL = 1e-3
COMPLETION_SEED = 0


@dataclass(frozen=True)
class InitResult:
    initial_unmixing: tuple
    canonical_correlations: np.ndarray


def qr_positive(M):
    """QR factorization with a non-negative diagonal in R."""
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def sign_by_largest(V):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def complete_orthonormal(Q, seed=COMPLETION_SEED):
    """Extend the orthonormal columns of ``Q`` (r x m) to an r x r orthogonal matrix."""
    r, m = Q.shape
    if m == r:
        return Q
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((r, r - m))
    R -= Q @ (Q.T @ R)
    Qc, _ = qr_positive(R)
    Qc -= Q @ (Q.T @ Qc)
    Qc, _ = qr_positive(Qc)
    return np.hstack([Q, Qc])


def _check_white(Z, d):
    n = Z.shape[1]
    cov = Z @ Z.T / n
    dev = np.max(np.abs(cov - np.eye(Z.shape[0])))
    if dev > WHITE_TOL:
        raise DataError(f"view {d} is not whitened (covariance deviates from I by {dev:.2e})")


def cca_initialize(whitened_views) -> InitResult:
    Zs = [np.asarray(Z, dtype=np.float64) for Z in whitened_views]
    D = len(Zs)
    if D < 2:
        raise DataError("CCA initialization needs at least two views")
    n = Zs[0].shape[1]
    for d, Z in enumerate(Zs):
        if Z.shape[1] != n:
            raise DataError("views must share the sample count")
        _check_white(Z, d)
    dims = [Z.shape[0] for Z in Zs]
    m = min(dims)

    if D == 2:
        C12 = Zs[0] @ Zs[1].T / n
        U, s, Vt = np.linalg.svd(C12, full_matrices=False)
        V = Vt.T
        # sign each canonical pair jointly by the largest entry of the stacked loading
        stacked = sign_by_largest(np.vstack([U, V]))
        U, V = stacked[: dims[0]], stacked[dims[0] :]
        blocks = [U, V]
        corr = np.clip(s, -1.0, 1.0)
    else:
        Z = np.vstack(Zs)
        C = Z @ Z.T / n
        C = 0.5 * (C + C.T)
        ev, E = np.linalg.eigh(C)
        order = np.argsort(ev)[::-1][:m]
        E = sign_by_largest(E[:, order])
        offsets = np.cumsum([0] + dims)
        blocks = []
        for d in range(D):
            Q, _ = qr_positive(E[offsets[d] : offsets[d + 1]])
            blocks.append(Q)
        corr = np.clip((ev[order] - 1.0) / (D - 1), -1.0, 1.0)

    Ws = tuple(complete_orthonormal(B).T for B in blocks)
    return InitResult(initial_unmixing=Ws, canonical_correlations=corr)
