"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``SHINDICA_DISABLE_NUMBA`` is unset (or set to ``0``).  Both paths
are always importable as ``*_nb`` / ``*_np`` so tests and the benchmark can
compare them directly.
"""

import os

import numpy as np

try:
    import numba as nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SHINDICA_DISABLE_NUMBA", "0") in ("", "0")

LOG2 = float(np.log(2.0))

kwd = {"cache": True, "fastmath": False}


def _njit(fn):
    if HAS_NUMBA:
        return nb.njit(**kwd)(fn)
    return fn


# ---------------------------------------------------------------------------
# nonlinearities: summed value and elementwise derivative in one pass
# ---------------------------------------------------------------------------


def logcosh_np(Z):
    """Return ``(sum(g(Z)), g'(Z))`` for ``g(s) = -log cosh(s)``."""
    a = np.abs(Z)
    t = np.exp(-2.0 * a)
    value = -np.sum(a + np.log1p(t) - LOG2)
    # tanh|s| = (1 - t) / (1 + t) with t = exp(-2|s|)
    return value, -np.sign(Z) * (1.0 - t) / (1.0 + t)


def gauss_np(Z):
    """Return ``(sum(g(Z)), g'(Z))`` for ``g(s) = exp(-s^2 / 2)``."""
    e = np.exp(-0.5 * Z * Z)
    return float(np.sum(e)), -Z * e


@_njit
def _logcosh_nb(Z):
    n, m = Z.shape
    deriv = np.empty((n, m))
    total = 0.0
    for i in range(n):
        for j in range(m):
            s = Z[i, j]
            a = abs(s)
            t = np.exp(-2.0 * a)
            total -= a + np.log1p(t) - 0.6931471805599453
            th = (1.0 - t) / (1.0 + t)
            deriv[i, j] = -th if s >= 0 else th
    return total, deriv


@_njit
def _gauss_nb(Z):
    n, m = Z.shape
    deriv = np.empty((n, m))
    total = 0.0
    for i in range(n):
        for j in range(m):
            s = Z[i, j]
            e = np.exp(-0.5 * s * s)
            total += e
            deriv[i, j] = -s * e
    return total, deriv


def logcosh_nb(Z):
    return _logcosh_nb(np.ascontiguousarray(Z, dtype=np.float64))


def gauss_nb(Z):
    return _gauss_nb(np.ascontiguousarray(Z, dtype=np.float64))


# ---------------------------------------------------------------------------
# lasso coordinate descent (inner solver of the graphical lasso)
# ---------------------------------------------------------------------------


def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lasso_cd_np(V, u, lam, beta, tol, max_iter):
    """Minimize ``0.5 b'Vb - u'b + lam * |b|_1`` by cyclic coordinate descent.

    ``beta`` is the warm start and is updated in place.  Returns the number
    of sweeps used.
    """
    p = V.shape[0]
    grad_part = V @ beta
    for it in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            old = beta[j]
            r = u[j] - grad_part[j] + V[j, j] * old
            new = _soft(r, lam) / V[j, j]
            if new != old:
                grad_part += V[:, j] * (new - old)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            return it + 1
    return max_iter


@_njit
def _lasso_cd_nb(V, u, lam, beta, tol, max_iter):
    p = V.shape[0]
    grad_part = V @ beta
    for it in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            old = beta[j]
            r = u[j] - grad_part[j] + V[j, j] * old
            if r > lam:
                new = (r - lam) / V[j, j]
            elif r < -lam:
                new = (r + lam) / V[j, j]
            else:
                new = 0.0
            if new != old:
                d = new - old
                for i in range(p):
                    grad_part[i] += V[i, j] * d
                beta[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        if max_delta < tol:
            return it + 1
    return max_iter


def lasso_cd_nb(V, u, lam, beta, tol, max_iter):
    return _lasso_cd_nb(
        np.ascontiguousarray(V), np.ascontiguousarray(u), float(lam), beta, float(tol), int(max_iter)
    )


# ---------------------------------------------------------------------------
# linear assignment: shortest augmenting path with potentials, O(n^2 m)
# ---------------------------------------------------------------------------


def hungarian_np(cost):
    """Optimal assignment for an ``n x m`` cost with ``n <= m``.

    Returns ``col_of_row`` of length ``n``.  Ties in the column scan are broken
    towards the lowest column index, which makes the result deterministic.
    """
    n, m = cost.shape
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: row (1-based) matched to column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cols = np.flatnonzero(~used[1:]) + 1
            cur = cost[i0 - 1, cols - 1] - u[i0] - v[cols]
            better = cur < minv[cols]
            minv[cols[better]] = cur[better]
            way[cols[better]] = j0
            k = np.argmin(minv[cols])
            j1 = cols[k]
            delta = minv[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


@_njit
def _hungarian_nb(cost):
    n, m = cost.shape
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.zeros(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = INF
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def hungarian_nb(cost):
    return _hungarian_nb(np.ascontiguousarray(cost, dtype=np.float64))


# The elementwise nonlinearities stay on numpy for both backends: its
# vectorized exp/log1p beat the scalar numba loop by about 3x (see
# benchmarks/bench_kernels.py).  The numba versions are kept for comparison.
logcosh = logcosh_np
gauss = gauss_np

if USE_NUMBA:
    lasso_cd = lasso_cd_nb
    hungarian_assign = hungarian_nb
else:
    lasso_cd = lasso_cd_np
    hungarian_assign = hungarian_np

BACKEND = "numba" if USE_NUMBA else "numpy"
