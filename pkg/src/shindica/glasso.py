"""Graphical lasso, EBIC scoring and the two-view co-regulation pipeline.

The solver is block coordinate descent on the covariance estimate ``W``
(one column at a time, each an l1-regularized quadratic solved by
coordinate descent).  The penalty acts on off-diagonal entries only, so
``W_ii = S_ii`` throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .datamodel import DataError, MultiViewDataset, NumericalError
from .estimator import FitConfig, fit, transform

DEFAULT_GAMMA = 0.5
DEFAULT_GRID_SIZE = 30


@dataclass
class PrecisionEstimate:
    theta: np.ndarray
    lam: float
    edges: list
    iterations: int
    converged: bool
    duality_gap: float
    kkt_residual: float
    dual_trace: list = field(default_factory=list)
    ebic: float = float("nan")

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def edge_list(theta) -> list:
    """``(i, j, |theta_ij|)`` for every non-zero off-diagonal pair, strongest first."""
    theta = np.asarray(theta)
    iu, ju = np.triu_indices(theta.shape[0], 1)
    vals = theta[iu, ju]
    nz = vals != 0
    edges = [(int(i), int(j), float(abs(v))) for i, j, v in zip(iu[nz], ju[nz], vals[nz])]
    edges.sort(key=lambda e: (-e[2], e[0], e[1]))
    return edges


def primal_objective(theta, S, lam) -> float:
    """``-log det(theta) + tr(S theta) + lam * sum_{i != j} |theta_ij|``."""
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return float("inf")
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    return float(-logdet + np.sum(S * theta) + lam * off)


def kkt_residual(theta, S, lam) -> float:
    """Largest violation of the optimality conditions, measured on ``W = theta^{-1}``."""
    W = np.linalg.inv(theta)
    R = W - S
    p = theta.shape[0]
    off = ~np.eye(p, dtype=bool)
    active = off & (theta != 0)
    inactive = off & (theta == 0)
    res = np.abs(np.diag(R)).max(initial=0.0)
    if active.any():
        res = max(res, np.abs(R[active] - lam * np.sign(theta[active])).max())
    if inactive.any():
        res = max(res, np.maximum(np.abs(R[inactive]) - lam, 0.0).max())
    return float(res)


def _validate_sigma(S):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise DataError("sigma_hat must be a square matrix")
    if not np.isfinite(S).all():
        raise DataError("sigma_hat must be finite")
    if np.max(np.abs(S - S.T)) > 1e-10:
        raise DataError("sigma_hat must be symmetric")
    if np.any(np.diag(S) <= 0):
        raise DataError("sigma_hat must have a positive diagonal")
    return 0.5 * (S + S.T)


def graphical_lasso(
    sigma_hat, lam: float, tol: float = 1e-9, max_iter: int = 1000, warm_start=None
) -> PrecisionEstimate:
    """Solve ``min_{theta > 0} -log det theta + tr(S theta) + lam * ||offdiag(theta)||_1``.

    Parameters
    ----------
    sigma_hat : ndarray (p, p)
        Correlation (or covariance) matrix.
    lam : float
        Non-negative penalty.  ``lam = 0`` needs a positive-definite input.
    tol : float
        Stop when a full sweep changes ``W`` by less than ``tol`` (max-norm).
    warm_start : ndarray, optional
        Initial ``W``; its diagonal is reset to that of ``sigma_hat``.

    Non-convergence is reported through ``converged=False`` with the last
    iterate returned.
    """
    S = _validate_sigma(sigma_hat)
    lam = float(lam)
    if lam < 0:
        raise DataError("lambda must be non-negative")
    p = S.shape[0]
    if lam == 0:
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise NumericalError("lambda = 0 needs a positive-definite sigma_hat") from None
    W = S.copy() if warm_start is None else np.array(warm_start, dtype=np.float64)
    np.fill_diagonal(W, np.diag(S))
    B = np.zeros((p, p))
    inner_tol = 0.1 * tol
    dual_trace = []
    converged = False
    it = 0
    mask = np.ones(p, dtype=bool)
    for it in range(1, max_iter + 1):
        W_old = W.copy()
        for j in range(p):
            mask[j] = False
            V = W[np.ix_(mask, mask)]
            beta = B[mask, j].copy()
            _kernels.lasso_cd(V, S[mask, j], lam, beta, inner_tol, 10000)
            B[mask, j] = beta
            w = V @ beta
            W[mask, j] = w
            W[j, mask] = w
            mask[j] = True
        sign, logdet = np.linalg.slogdet(W)
        dual_trace.append(float(logdet + p) if sign > 0 else -np.inf)
        if np.max(np.abs(W - W_old)) < tol:
            converged = True
            break
    theta = np.zeros((p, p))
    for j in range(p):
        mask[j] = False
        beta = B[mask, j]
        denom = W[j, j] - W[mask, j] @ beta
        if denom <= 0:
            raise NumericalError("graphical lasso lost positive definiteness")
        theta[j, j] = 1.0 / denom
        theta[mask, j] = -beta * theta[j, j]
        mask[j] = True
    theta = 0.5 * (theta + theta.T)
    if np.linalg.eigvalsh(theta)[0] <= 0:
        raise NumericalError("graphical lasso produced a non positive-definite precision matrix")
    dual = dual_trace[-1] if dual_trace else float(np.linalg.slogdet(W)[1] + p)
    return PrecisionEstimate(
        theta=theta,
        lam=lam,
        edges=edge_list(theta),
        iterations=it,
        converged=converged,
        duality_gap=primal_objective(theta, S, lam) - dual,
        kkt_residual=kkt_residual(theta, S, lam),
        dual_trace=dual_trace,
    )


def ebic(theta, sigma_hat, n_samples: int, gamma: float = DEFAULT_GAMMA, scale_fit: bool = True) -> float:
    """Extended BIC of a precision estimate; lower is better.

    ``n (-log det theta + tr(S theta)) + |E| log n + 4 |E| gamma log p``

    The fit term is ``-2`` times the Gaussian log-likelihood of ``n`` samples
    (constants dropped).  ``scale_fit=False`` leaves out the factor ``n``, in
    which case the edge penalty dominates at any realistic sample size and the
    empty graph is nearly always selected.
    """
    if isinstance(theta, PrecisionEstimate):
        theta = theta.theta
    theta = np.asarray(theta, dtype=np.float64)
    S = np.asarray(sigma_hat, dtype=np.float64)
    if theta.shape != S.shape or theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise DataError("theta and sigma_hat must be square and of equal shape")
    if not 0 <= gamma <= 1:
        raise DataError("gamma must lie in [0, 1]")
    if n_samples < 1:
        raise DataError("n_samples must be positive")
    p = theta.shape[0]
    n_edges = len(edge_list(theta))
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        raise DataError("theta must be positive definite")
    fit_term = -logdet + np.sum(S * theta)
    if scale_fit:
        fit_term *= n_samples
    return float(fit_term + n_edges * np.log(n_samples) + 4 * n_edges * gamma * np.log(p))


def lambda_grid(sigma_hat, size: int = DEFAULT_GRID_SIZE, ratio: float = 0.01) -> np.ndarray:
    """Log-spaced penalties on ``[ratio * t, t]`` with ``t = max |offdiag(S)|`` (ascending)."""
    S = np.asarray(sigma_hat)
    if size < 1:
        raise DataError("grid size must be positive")
    off = np.abs(S[~np.eye(S.shape[0], dtype=bool)])
    top = float(off.max()) if off.size else 1.0
    if top == 0:
        top = 1.0
    if size == 1:
        return np.array([top])
    return np.logspace(np.log10(ratio * top), np.log10(top), size)


def glasso_path(
    sigma_hat, lambdas, n_samples: int, gamma: float = DEFAULT_GAMMA, tol=1e-9, max_iter=1000, scale_fit=True
):
    """Solve along ``lambdas`` (largest first, warm-started) and attach EBIC scores.

    Returns the estimates in the order of ``lambdas``.
    """
    S = _validate_sigma(sigma_hat)
    lambdas = [float(v) for v in lambdas]
    order = np.argsort(lambdas)[::-1]
    out = [None] * len(lambdas)
    W = None
    for i in order:
        est = graphical_lasso(S, lambdas[i], tol=tol, max_iter=max_iter, warm_start=W)
        est.ebic = ebic(est.theta, S, n_samples, gamma, scale_fit)
        W = np.linalg.inv(est.theta)
        out[i] = est
    return out


def correlation_of_columns(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    Sc = S - S.mean(axis=0)
    norms = np.linalg.norm(Sc, axis=0)
    if np.any(norms == 0):
        raise DataError("a feature column has zero variance across source rows")
    Sc = Sc / norms
    C = Sc.T @ Sc
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


@dataclass
class CoregulationResult:
    models: list  # PrecisionEstimate, best EBIC first
    lambdas: np.ndarray
    sigma_hat: np.ndarray
    sources: np.ndarray
    n_samples: int

    @property
    def best(self) -> PrecisionEstimate:
        return self.models[0]


def coregulation_pipeline(
    view1,
    view2,
    shared_count: int,
    fit_config: FitConfig = None,
    lambda_grid_size: int = DEFAULT_GRID_SIZE,
    gamma: float = DEFAULT_GAMMA,
    top_models: int = 10,
    scale_fit: bool = True,
) -> CoregulationResult:
    """Integrate two views, then learn a sparse feature graph from the sources.

    ``view1`` (n1 x p) and ``view2`` (n2 x p) share their p columns (genes).
    Estimated sources of both views are stacked row-wise into a
    ``(r1 + r2) x p`` matrix whose column correlations feed the graphical
    lasso; the number of stacked rows is the sample size in EBIC.
    """
    data = MultiViewDataset((view1, view2))
    model = fit(data, shared_count, fit_config)
    S = np.vstack(transform(model, data).z)
    sigma = correlation_of_columns(S)
    lambdas = lambda_grid(sigma, lambda_grid_size)
    path = glasso_path(sigma, lambdas, S.shape[0], gamma, scale_fit=scale_fit)
    ranked = sorted(path, key=lambda e: (e.ebic, -e.lam))
    return CoregulationResult(
        models=ranked[: max(1, top_models)],
        lambdas=lambdas,
        sigma_hat=sigma,
        sources=S,
        n_samples=S.shape[0],
    )


def write_edges(edges, path) -> None:
    """Edge list as CSV with columns ``i, j, strength, rank`` (rank 1 = strongest)."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "strength", "rank"])
        for rank, (i, j, s) in enumerate(edges, 1):
            w.writerow([i, j, repr(float(s)), rank])
