"""Synthetic multi-view data ``x_d = A_d((s_0; s_d) + eps_d)`` with ground truth.

Random streams: shared sources use ``SeedSequence(seed, spawn_key=(0,))`` and
view ``d`` uses ``spawn_key=(d + 1,)`` for its mixing matrix, individual
sources and noise (drawn in that order).  Adding views therefore never
changes the draws of existing views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .datamodel import DataError, GenerativeGroundTruth, MultiViewDataset, NumericalError

SOURCE_LAWS = ("laplace", "uniform-sub")
MIN_SINGULAR = 1e-6
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class SimulationConfig:
    n_views: int = 2
    sources_per_view: int = 10
    shared_count: int = 5
    samples: int = 1000
    noise_sigma: Union[float, Sequence[float]] = 0.0
    source_law: str = "laplace"
    mixing_mean: float = 1.0
    mixing_std: float = 0.1
    seed: int = 0
    view_dims: Optional[Sequence[int]] = None

    def __post_init__(self):
        dims = self.dims
        if self.n_views < 1:
            raise DataError("n_views must be at least 1")
        if len(dims) != self.n_views or min(dims) < 1:
            raise DataError("view dimensions must be positive, one per view")
        if not 0 <= self.shared_count <= min(dims):
            raise DataError("shared_count must lie in [0, min_d k_d]")
        if self.samples < 2:
            raise DataError("need at least 2 samples")
        if not self.mixing_std > 0:
            raise DataError("mixing_std must be positive")
        if self.source_law not in SOURCE_LAWS:
            raise DataError(f"source_law must be one of {SOURCE_LAWS}")
        sig = self.sigmas
        if len(sig) != self.n_views or min(sig) < 0:
            raise DataError("noise sigma must be non-negative, scalar or one per view")

    @property
    def dims(self) -> list:
        if self.view_dims is not None:
            return [int(k) for k in self.view_dims]
        return [int(self.sources_per_view)] * int(self.n_views)

    @property
    def sigmas(self) -> list:
        sig = np.atleast_1d(np.asarray(self.noise_sigma, dtype=np.float64))
        if sig.size == 1:
            return [float(sig[0])] * int(self.n_views)
        return [float(s) for s in sig]


def _standardize_rows(S):
    S = S - S.mean(axis=1, keepdims=True)
    std = S.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    S = S / std
    # second pass removes the O(eps) residual mean left by the division
    return S - S.mean(axis=1, keepdims=True)


def sample_laplace_standardized(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Laplace draws, then each row shifted and scaled to mean 0 and variance 1."""
    if rows < 1 or cols < 1:
        raise DataError("rows and cols must be positive")
    return _standardize_rows(rng.laplace(0.0, 1.0, size=(rows, cols)))


def sample_uniform_standardized(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise DataError("rows and cols must be positive")
    return _standardize_rows(rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(rows, cols)))


def _sample_sources(rows, cols, law, rng):
    if rows == 0:
        return np.zeros((0, cols))
    if law == "laplace":
        return sample_laplace_standardized(rows, cols, rng)
    return sample_uniform_standardized(rows, cols, rng)


def sample_mixing(k: int, mean: float, std: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian mixing matrix, resampled until its smallest singular value is >= 1e-6."""
    for _ in range(MAX_RESAMPLES):
        A = rng.normal(mean, std, size=(k, k))
        if np.linalg.svd(A, compute_uv=False)[-1] >= MIN_SINGULAR:
            return A
    raise NumericalError(f"mixing matrix singular after {MAX_RESAMPLES} attempts")


def view_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def simulate(config: SimulationConfig):
    """Draw ``(dataset, ground_truth)`` from the generative model."""
    c, n = config.shared_count, config.samples
    S0 = _sample_sources(c, n, config.source_law, view_rng(config.seed, 0))
    views, mixing, indiv = [], [], []
    for d, (k, sigma) in enumerate(zip(config.dims, config.sigmas)):
        rng = view_rng(config.seed, d + 1)
        A = sample_mixing(k, config.mixing_mean, config.mixing_std, rng)
        Sd = _sample_sources(k - c, n, config.source_law, rng)
        S = np.vstack([S0, Sd])
        if sigma > 0:
            S = S + sigma * rng.standard_normal(size=(k, n))
        views.append(A @ S)
        mixing.append(A)
        indiv.append(Sd)
    truth = GenerativeGroundTruth(
        mixing=tuple(mixing),
        shared_sources=S0,
        individual_sources=tuple(indiv),
        noise_sigma=tuple(config.sigmas),
        shared_count=c,
    )
    return MultiViewDataset(tuple(views)), truth
