"""Normalized reconstruction error (NRE) and train/test selection of the shared count."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import DataError, MultiViewDataset
from .estimator import FitConfig, fit, transform

TIE_TOL = 1e-9
TIE_REL_TOL = 0.05


def nre(shared_rows) -> np.ndarray:
    """Per-sample NRE scores for a list of ``k x M`` shared-block estimates.

    ``score_i = sum_d ||z_d0^i - mean_l z_l0^i||^2 / k``
    """
    Z = [np.atleast_2d(np.asarray(z, dtype=np.float64)) for z in shared_rows]
    if len(Z) < 2:
        raise DataError("NRE needs at least two views")
    shape = Z[0].shape
    if any(z.shape != shape for z in Z):
        raise DataError("all shared blocks must have the same shape")
    k = shape[0]
    if k == 0:
        raise DataError("NRE is undefined for k = 0")
    # centre on the first view so identical blocks give exact zeros
    stack = np.stack(Z) - Z[0]
    dev = stack - stack.mean(axis=0)
    return np.sum(dev * dev, axis=(0, 1)) / k


def select_from_curve(k_grid, curve, tol: float = TIE_TOL, rel_tol: float = TIE_REL_TOL) -> int:
    """Largest k among the minimizers of the curve.

    Values within ``tol + rel_tol * min(curve)`` of the minimum count as tied.
    Below the true shared count the held-out curve is flat up to a few percent
    of sampling noise, so an exact argmin would pick an arbitrary small k;
    ``rel_tol=0`` recovers the exact rule.
    """
    curve = np.asarray(curve, dtype=np.float64)
    if len(curve) != len(k_grid) or not len(curve):
        raise DataError("curve and k_grid must be non-empty and of equal length")
    best = np.min(curve)
    bound = best + tol + rel_tol * abs(best)
    return int(max(k for k, v in zip(k_grid, curve) if v <= bound))


@dataclass
class SelectionReport:
    k_grid: list
    nre_per_k: list  # nre_per_k[rep][i] for k_grid[i]
    k_star: int
    split_fraction: float
    repetitions: int
    seed: int
    train_nre_per_k: list = field(default_factory=list)
    rel_tol: float = TIE_REL_TOL

    @property
    def curve(self) -> np.ndarray:
        return np.mean(np.asarray(self.nre_per_k), axis=0)

    def to_dict(self) -> dict:
        return {
            "k_grid": list(self.k_grid),
            "nre_per_k": [list(map(float, r)) for r in self.nre_per_k],
            "train_nre_per_k": [list(map(float, r)) for r in self.train_nre_per_k],
            "nre_mean": [float(v) for v in self.curve],
            "k_star": self.k_star,
            "split_fraction": self.split_fraction,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "tie_rel_tol": self.rel_tol,
        }


def select_shared_count(
    data: MultiViewDataset,
    k_grid,
    fit_config: FitConfig = None,
    split_fraction: float = 0.75,
    repetitions: int = 50,
    seed: int = 0,
    rel_tol: float = TIE_REL_TOL,
) -> SelectionReport:
    """Choose the number of shared sources by held-out NRE.

    Each repetition draws a uniform random split of the sample columns, fits
    one model per candidate k on the train part and scores the test part.  The
    per-k test NRE is averaged over repetitions and the largest minimizer wins.
    """
    k_grid = [int(k) for k in k_grid]
    if not k_grid:
        raise DataError("k_grid must not be empty")
    if min(k_grid) < 1:
        raise DataError("candidate shared counts must be positive")
    if repetitions < 1:
        raise DataError("repetitions must be positive")
    if not 0 < split_fraction < 1:
        raise DataError("split_fraction must lie in (0, 1)")
    n = data.sample_count
    n_train = int(round(split_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise DataError("degenerate split: both parts need at least 2 samples")
    rng = np.random.default_rng(seed)
    test_scores, train_scores = [], []
    for _ in range(repetitions):
        perm = rng.permutation(n)
        train = data.subset(np.sort(perm[:n_train]))
        test = data.subset(np.sort(perm[n_train:]))
        row, train_row = [], []
        for k in k_grid:
            model = fit(train, k, fit_config)
            row.append(float(np.mean(nre(transform(model, test).z_shared))))
            train_row.append(float(np.mean(nre(transform(model, train).z_shared))))
        test_scores.append(row)
        train_scores.append(train_row)
    curve = np.mean(test_scores, axis=0)
    return SelectionReport(
        k_grid=k_grid,
        nre_per_k=test_scores,
        k_star=select_from_curve(k_grid, curve, rel_tol=rel_tol),
        split_fraction=split_fraction,
        repetitions=repetitions,
        seed=seed,
        train_nre_per_k=train_scores,
        rel_tol=rel_tol,
    )
