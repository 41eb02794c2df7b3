"""L-BFGS over a product of orthogonal groups by trivialization.

Around an anchor ``B_d`` each matrix is parametrized as ``W_d = B_d expm(S_d)``
with ``S_d`` skew-symmetric, so the inner problem lives in the flat space of
strictly upper-triangular coordinates.  The anchor is moved to the current
point every ``reanchor_every`` iterations or once the coordinates leave the
unit ball, keeping ``expm`` in its well-conditioned regime.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, expm_frechet
from scipy.optimize import line_search

from .cca_init import qr_positive
from .datamodel import DataError, NumericalError, orthogonality_error

log = logging.getLogger(__name__)

SKEW_TOL = 1e-10
DRIFT_TOL = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 500
    gradient_tolerance: float = 1e-7
    lbfgs_memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 25
    reanchor_every: int = 20
    reanchor_radius: float = 1.0
    verbose: bool = False

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise DataError("gradient_tolerance must be positive")
        if self.lbfgs_memory < 1:
            raise DataError("lbfgs_memory must be at least 1")
        if self.max_iterations < 0:
            raise DataError("max_iterations must be non-negative")


@dataclass
class OptimizerDiagnostics:
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    objective_trace: list = field(default_factory=list)
    gradient_norms: list = field(default_factory=list)
    max_orthogonality_error: float = 0.0
    function_evaluations: int = 0
    reanchors: int = 0


def skew(M):
    return 0.5 * (M - M.T)


def retract_skew(base, S):
    """``base @ expm(S)`` for skew-symmetric ``S``."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError("tangent coefficients must be a square matrix")
    if np.max(np.abs(S + S.T), initial=0.0) > SKEW_TOL:
        raise DataError("tangent coefficients are not skew-symmetric")
    return np.asarray(base) @ expm(S)


def riemannian_gradient(W, G):
    """Skew-symmetric (Lie algebra) gradient ``skew(W^T G)``."""
    return skew(W.T @ G)


class _Chart:
    """Flat coordinates ``x`` around fixed anchors."""

    def __init__(self, anchors):
        self.anchors = [np.array(B) for B in anchors]
        self.dims = [B.shape[0] for B in anchors]
        self.idx = [np.triu_indices(r, 1) for r in self.dims]
        self.sizes = [len(i[0]) for i in self.idx]
        self.offsets = np.cumsum([0] + self.sizes)

    @property
    def size(self):
        return int(self.offsets[-1])

    def skews(self, x):
        out = []
        for r, (iu, ju), a, b in zip(self.dims, self.idx, self.offsets[:-1], self.offsets[1:]):
            S = np.zeros((r, r))
            S[iu, ju] = x[a:b]
            out.append(S - S.T)
        return out

    def point(self, x):
        if not np.any(x):
            return [B.copy() for B in self.anchors]
        return [B @ expm(S) for B, S in zip(self.anchors, self.skews(x))]

    def pullback(self, x, grads):
        """Gradient w.r.t. ``x`` of ``f(B expm(S(x)))`` given Euclidean ``grads`` at the point."""
        out = np.empty(self.size)
        zero = not np.any(x)
        skews = None if zero else self.skews(x)
        for d, (B, G, (iu, ju)) in enumerate(zip(self.anchors, grads, self.idx)):
            H = B.T @ G
            if zero:
                L = H
            else:
                # the adjoint of the Frechet derivative of expm at S is the derivative at S^T
                L = expm_frechet(skews[d].T, H, compute_expm=False)
            out[self.offsets[d] : self.offsets[d + 1]] = L[iu, ju] - L[ju, iu]
        return out


def _reorthogonalize(W):
    if orthogonality_error(W) > DRIFT_TOL:
        Q, _ = qr_positive(W)
        return Q
    return W


def minimize_orthogonal(initial, objective_fn, gradient_fn, config: OptimizerConfig = None):
    """Minimize ``objective_fn(weights)`` over orthogonal ``weights``.

    Parameters
    ----------
    initial : list of ndarray
        Orthogonal starting matrices.
    objective_fn : callable
        ``objective_fn(list_of_matrices) -> float``.
    gradient_fn : callable
        ``gradient_fn(list_of_matrices) -> list`` of Euclidean gradients.
    config : OptimizerConfig

    Returns
    -------
    weights : list of ndarray
    diagnostics : OptimizerDiagnostics
    """
    cfg = config or OptimizerConfig()
    weights = [np.array(W, dtype=np.float64) for W in initial]
    for d, W in enumerate(weights):
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DataError(f"initial matrix {d} is not square")
        if orthogonality_error(W) > 1e-8:
            raise DataError(f"initial matrix {d} is not orthogonal")
    diag = OptimizerDiagnostics()

    f = float(objective_fn(weights))
    diag.function_evaluations += 1
    if not np.isfinite(f):
        raise NumericalError("objective is not finite at the initial point")
    grads = gradient_fn(weights)
    diag.objective_trace.append(f)
    diag.max_orthogonality_error = max(orthogonality_error(W) for W in weights)

    def rgrad_norm(ws, gs):
        return max((np.max(np.abs(riemannian_gradient(W, G)), initial=0.0) for W, G in zip(ws, gs)), default=0.0)

    chart = _Chart(weights)
    x = np.zeros(chart.size)
    cache = {}

    def evaluate(xv):
        key = xv.tobytes()
        if key not in cache:
            ws = chart.point(xv)
            fv = float(objective_fn(ws))
            diag.function_evaluations += 1
            cache.clear()
            cache[key] = [ws, fv, None]
        return cache[key]

    def fun(xv):
        return evaluate(xv)[1]

    def jac(xv):
        entry = evaluate(xv)
        if entry[2] is None:
            entry[2] = gradient_fn(entry[0])
        return chart.pullback(xv, entry[2])

    g = chart.pullback(x, grads)
    cache[x.tobytes()] = [weights, f, grads]
    memory = deque(maxlen=cfg.lbfgs_memory)
    gnorm = rgrad_norm(weights, grads)
    diag.gradient_norms.append(gnorm)
    since_anchor = 0
    old_f = None

    if gnorm <= cfg.gradient_tolerance:
        diag.converged, diag.stop_reason = True, "gradient tolerance"
        return weights, diag
    if chart.size == 0:
        diag.converged, diag.stop_reason = True, "trivial group"
        return weights, diag

    for it in range(cfg.max_iterations):
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(memory):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if memory:
            s, y, _ = memory[-1]
            q *= (s @ y) / (y @ y)
        else:
            q /= max(1.0, np.linalg.norm(g))
        for (s, y, rho), a in zip(memory, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        p = -q
        if g @ p >= 0:
            memory.clear()
            p = -g / max(1.0, np.linalg.norm(g))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            alpha, _, _, f_new, _, _ = line_search(
                fun, jac, x, p, gfk=g, old_fval=f, old_old_fval=old_f,
                c1=cfg.c1, c2=cfg.c2, maxiter=cfg.max_line_search,
            )
        if alpha is None or f_new is None or not np.isfinite(f_new) or f_new > f:
            diag.stop_reason = "line search failure"
            break
        x_new = x + alpha * p
        g_new = jac(x_new)
        ws_new, _, grads_new = evaluate(x_new)
        s_vec, y_vec = x_new - x, g_new - g
        sy = s_vec @ y_vec
        if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            memory.append((s_vec, y_vec, 1.0 / sy))
        old_f, f, x, g = f, f_new, x_new, g_new
        weights, grads = ws_new, grads_new
        diag.iterations = it + 1
        diag.objective_trace.append(f)
        diag.max_orthogonality_error = max(
            diag.max_orthogonality_error, max(orthogonality_error(W) for W in weights)
        )
        gnorm = rgrad_norm(weights, grads)
        diag.gradient_norms.append(gnorm)
        if cfg.verbose:
            log.info("iter %d  f=%.10g  |grad|=%.3e", it + 1, f, gnorm)
        if gnorm <= cfg.gradient_tolerance:
            diag.converged, diag.stop_reason = True, "gradient tolerance"
            break

        since_anchor += 1
        if since_anchor >= cfg.reanchor_every or np.linalg.norm(x) > cfg.reanchor_radius:
            weights = [_reorthogonalize(W) for W in weights]
            chart = _Chart(weights)
            x = np.zeros(chart.size)
            cache.clear()
            cache[x.tobytes()] = [weights, f, grads]
            g = chart.pullback(x, grads)
            since_anchor = 0
            diag.reanchors += 1
    else:
        diag.stop_reason = "max iterations"

    weights = [_reorthogonalize(W) for W in weights]
    diag.max_orthogonality_error = max(
        diag.max_orthogonality_error, max(orthogonality_error(W) for W in weights)
    )
    return weights, diag
