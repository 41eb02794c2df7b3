"""Whiten, CCA-initialize, optimize: the full fitting pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .cca_init import cca_initialize
from .datamodel import DataError, FittedModel, MultiViewDataset, as_views
from .objective import ObjectiveConfig, SourceEstimates, value_and_gradient
from .optimizer import OptimizerConfig, minimize_orthogonal
from .whitening import apply_whitening, fit_whitening


@dataclass(frozen=True)
class FitConfig:
    lam: float = 1.0
    nonlinearity: str = "logcosh"
    retain: Optional[Union[int, float]] = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)


def fit(data: MultiViewDataset, shared_count: int, config: FitConfig = None) -> FittedModel:
    """Estimate orthogonal unmixing matrices with ``shared_count`` shared sources.

    The optimizer sees the objective divided by the sample count, so the
    gradient tolerance does not depend on N.  ``objective_trace`` in the
    returned model holds the unscaled values.
    """
    cfg = config or FitConfig()
    views = as_views(data)
    if len(views) < 2:
        raise DataError("fitting needs at least two views")
    obj_cfg = ObjectiveConfig(shared_count=shared_count, lam=cfg.lam, nonlinearity=cfg.nonlinearity)
    transforms = [fit_whitening(X, cfg.retain) for X in views]
    Xw = [apply_whitening(t, X) for t, X in zip(transforms, views)]
    if shared_count > min(x.shape[0] for x in Xw):
        raise DataError(
            f"shared_count={shared_count} exceeds the smallest retained dimension "
            f"{min(x.shape[0] for x in Xw)}"
        )
    init = cca_initialize(Xw)
    n = Xw[0].shape[1]
    last = {}

    def compute(ws):
        key = tuple(w.tobytes() for w in ws)
        if last.get("key") != key:
            value, grads, _ = value_and_gradient(ws, Xw, obj_cfg, check=False)
            last.update(key=key, value=value / n, grads=[g / n for g in grads])
        return last

    weights, diag = minimize_orthogonal(
        list(init.initial_unmixing),
        lambda ws: compute(ws)["value"],
        lambda ws: compute(ws)["grads"],
        cfg.optimizer,
    )
    diagnostics = {
        "iterations": diag.iterations,
        "stop_reason": diag.stop_reason,
        "function_evaluations": diag.function_evaluations,
        "reanchors": diag.reanchors,
        "max_orthogonality_error": diag.max_orthogonality_error,
        "final_gradient_norm": diag.gradient_norms[-1] if diag.gradient_norms else None,
        "canonical_correlations": [float(v) for v in init.canonical_correlations],
    }
    return FittedModel(
        unmixing_whitened=tuple(weights),
        whitening=tuple(transforms),
        shared_count=shared_count,
        lam=cfg.lam,
        nonlinearity=cfg.nonlinearity,
        objective_trace=tuple(v * n for v in diag.objective_trace),
        converged=diag.converged,
        diagnostics=diagnostics,
    )


def _check_views(model: FittedModel, views):
    if len(views) != model.n_views:
        raise DataError(f"model has {model.n_views} views, data has {len(views)}")
    n = views[0].shape[1]
    for d, (X, t) in enumerate(zip(views, model.whitening)):
        if X.shape[0] != t.input_dim:
            raise DataError(f"view {d}: expected {t.input_dim} features, got {X.shape[0]}")
        if X.shape[1] != n:
            raise DataError("views must share the sample count")


def transform(model: FittedModel, data) -> SourceEstimates:
    """Whiten with the training transforms, then unmix."""
    views = as_views(data)
    _check_views(model, views)
    z = tuple(W @ apply_whitening(t, X) for W, t, X in zip(model.unmixing_whitened, model.whitening, views))
    return SourceEstimates(z, model.shared_count)


def extract_shared(model: FittedModel, data) -> np.ndarray:
    """Cross-view mean of the shared rows, ``c x N``."""
    est = transform(model, data)
    if model.shared_count == 0:
        return np.zeros((0, est.z[0].shape[1]))
    return est.shared_mean


def reconstruct(model: FittedModel, sources: SourceEstimates) -> list:
    """Map source estimates back to feature space with the estimated mixing matrices."""
    return [
        A @ z + t.mean[:, None]
        for A, z, t in zip(model.mixing_estimates, sources.z, model.whitening)
    ]
