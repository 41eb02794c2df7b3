"""Compare the numba and numpy paths of the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is timed on both backends with the same inputs (numba is
compiled before timing) and the outputs are checked for agreement.
"""

import argparse
import timeit

import numpy as np

from shindica import _kernels


def _time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(rng):
    Z = rng.laplace(size=(40, 1000))
    X = rng.standard_normal((200, 30))
    V = X.T @ X / 200
    u = rng.standard_normal(30)
    C = rng.random((60, 60))

    def lasso(impl):
        def run():
            beta = np.zeros(30)
            impl(V, u, 0.05, beta, 1e-10, 10000)
            return beta
        return run

    return [
        ("logcosh 40x1000", lambda: _kernels.logcosh_np(Z), lambda: _kernels.logcosh_nb(Z)),
        ("gauss 40x1000", lambda: _kernels.gauss_np(Z), lambda: _kernels.gauss_nb(Z)),
        ("lasso_cd p=30", lasso(_kernels.lasso_cd_np), lasso(_kernels.lasso_cd_nb)),
        ("hungarian 60x60", lambda: _kernels.hungarian_np(C), lambda: _kernels.hungarian_nb(C)),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-14)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    if not _kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}  agree")
    for name, f_np, f_nb in cases(rng):
        agree = _same(f_np(), f_nb())
        t_np = _time(f_np, args.repeat) * 1e3
        t_nb = _time(f_nb, args.repeat) * 1e3
        print(f"{name:<18}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
