"""Dataset / model containers and their CSV + JSON file representations.

Matrix files are headerless CSV (rows = features, columns = samples).  A
dataset is addressed by a JSON manifest ``{"views": [...], "names": [...]}``;
relative view paths are resolved against the manifest's directory.  Models
and ground-truth bundles are single JSON documents carrying
``"format_version": 1``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
ORTHO_TOL = 1e-8
NONLINEARITIES = ("logcosh", "gauss")


class DataError(ValueError):
    """Invalid input data, manifests or model files."""


class SchemaError(DataError):
    """A JSON document does not follow the expected schema."""


class NumericalError(RuntimeError):
    """A numerical procedure could not produce a valid result."""


def _frozen(a, ndim=2) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def orthogonality_error(W: np.ndarray) -> float:
    """Return ``max |W W^T - I|``."""
    W = np.asarray(W)
    return float(np.max(np.abs(W @ W.T - np.eye(W.shape[0])))) if W.size else 0.0


@dataclass(frozen=True)
class MultiViewDataset:
    """D paired views, view ``d`` stored as a ``k_d x N`` array."""

    views: tuple
    names: tuple = ()

    def __post_init__(self):
        views = tuple(_frozen(v) for v in self.views)
        if len(views) < 1:
            raise DataError("a dataset needs at least one view")
        n = views[0].shape[1]
        for d, v in enumerate(views):
            if v.shape[0] < 1:
                raise DataError(f"view {d} has no features")
            if v.shape[1] != n:
                raise DataError(
                    f"sample count mismatch: view 0 has {n} samples, view {d} has {v.shape[1]}"
                )
            if not np.all(np.isfinite(v)):
                raise DataError(f"view {d} contains non-finite values")
        if n < 1:
            raise DataError("a dataset needs at least one sample")
        names = tuple(self.names) if self.names else tuple(f"view{d}" for d in range(len(views)))
        if len(names) != len(views):
            raise DataError("names and views differ in length")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "names", names)

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def sample_count(self) -> int:
        return self.views[0].shape[1]

    @property
    def view_dims(self) -> list:
        return [v.shape[0] for v in self.views]

    def subset(self, columns) -> "MultiViewDataset":
        """Dataset restricted to the given sample columns (same order in every view)."""
        return MultiViewDataset(tuple(v[:, columns] for v in self.views), self.names)


@dataclass(frozen=True)
class GenerativeGroundTruth:
    mixing: tuple
    shared_sources: np.ndarray
    individual_sources: tuple
    noise_sigma: tuple
    shared_count: int

    def __post_init__(self):
        mixing = tuple(_frozen(a) for a in self.mixing)
        s0 = _frozen(self.shared_sources)
        indiv = tuple(_frozen(s) for s in self.individual_sources)
        sig = tuple(float(s) for s in np.atleast_1d(self.noise_sigma))
        c = int(self.shared_count)
        if len(sig) == 1 and len(mixing) > 1:
            sig = sig * len(mixing)
        if len(indiv) != len(mixing) or len(sig) != len(mixing):
            raise DataError("ground truth lists must have one entry per view")
        if any(s < 0 for s in sig):
            raise DataError("noise sigma must be non-negative")
        if s0.shape[0] != c:
            raise DataError("shared source matrix must have shared_count rows")
        for d, (a, s) in enumerate(zip(mixing, indiv)):
            k = a.shape[0]
            if a.shape != (k, k):
                raise DataError(f"mixing matrix {d} is not square")
            if not 0 <= c <= k:
                raise DataError("shared_count exceeds the view dimension")
            if s.shape[0] != k - c or s.shape[1] != s0.shape[1]:
                raise DataError(f"individual sources of view {d} have the wrong shape")
            if np.linalg.svd(a, compute_uv=False)[-1] <= 0:
                raise DataError(f"mixing matrix {d} is singular")
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "shared_sources", s0)
        object.__setattr__(self, "individual_sources", indiv)
        object.__setattr__(self, "noise_sigma", sig)
        object.__setattr__(self, "shared_count", c)

    def stacked_sources(self, d: int) -> np.ndarray:
        """``(s_0; s_d)`` for view ``d``, shared rows first."""
        return np.vstack([self.shared_sources, self.individual_sources[d]])


@dataclass(frozen=True)
class WhiteningTransform:
    """PCA whitening ``x -> K (x - mean)`` with ``K = diag(ev)^(-1/2) U^T``."""

    forward: np.ndarray
    inverse: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        K = _frozen(self.forward)
        Kinv = _frozen(self.inverse)
        mean = _frozen(self.mean, ndim=1)
        ev = _frozen(self.eigenvalues, ndim=1)
        r, k = K.shape
        if Kinv.shape != (k, r) or mean.shape != (k,) or ev.shape[0] < r:
            raise DataError("inconsistent whitening transform shapes")
        object.__setattr__(self, "forward", K)
        object.__setattr__(self, "inverse", Kinv)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def retained_dim(self) -> int:
        return self.forward.shape[0]

    @property
    def input_dim(self) -> int:
        return self.forward.shape[1]


@dataclass(frozen=True)
class FittedModel:
    unmixing_whitened: tuple
    whitening: tuple
    shared_count: int
    lam: float = 1.0
    nonlinearity: str = "logcosh"
    objective_trace: tuple = ()
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        Ws = tuple(_frozen(w) for w in self.unmixing_whitened)
        whitening = tuple(self.whitening)
        if len(Ws) != len(whitening) or not Ws:
            raise DataError("need one unmixing matrix per whitening transform")
        c = int(self.shared_count)
        for d, (W, t) in enumerate(zip(Ws, whitening)):
            r = t.retained_dim
            if W.shape != (r, r):
                raise DataError(f"unmixing matrix {d} has shape {W.shape}, expected {(r, r)}")
            err = orthogonality_error(W)
            if err > ORTHO_TOL:
                raise DataError(f"orthogonality violated for view {d}: {err:.3e}")
            if c > r:
                raise DataError("shared_count exceeds a retained dimension")
        if c < 0:
            raise DataError("shared_count must be non-negative")
        if not self.lam > 0:
            raise DataError("lambda must be positive")
        if self.nonlinearity not in NONLINEARITIES:
            raise DataError(f"unknown nonlinearity {self.nonlinearity!r}")
        object.__setattr__(self, "unmixing_whitened", Ws)
        object.__setattr__(self, "whitening", whitening)
        object.__setattr__(self, "shared_count", c)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "objective_trace", tuple(float(v) for v in self.objective_trace))
        object.__setattr__(self, "converged", bool(self.converged))

    @property
    def n_views(self) -> int:
        return len(self.unmixing_whitened)

    @property
    def mixing_estimates(self) -> list:
        """``A_d = K_d^+ W_d^T`` (features x retained components)."""
        return [t.inverse @ W.T for W, t in zip(self.unmixing_whitened, self.whitening)]

    @property
    def unmixing(self) -> list:
        """Unmixing in the original feature space, ``W_d K_d``."""
        return [W @ t.forward for W, t in zip(self.unmixing_whitened, self.whitening)]


# ---------------------------------------------------------------------------
# CSV matrices and manifests
# ---------------------------------------------------------------------------


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing matrix file: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError:
                raise DataError(f"non-numeric cell in {path}, line {lineno}") from None
    if not rows:
        raise DataError(f"empty matrix file: {path}")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"ragged rows in {path}")
    return np.array(rows, dtype=np.float64)


def load_dataset(manifest_path) -> MultiViewDataset:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"missing manifest: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from None
    paths = doc.get("views") if isinstance(doc, dict) else None
    if not isinstance(paths, list) or not paths:
        raise SchemaError("manifest needs a non-empty 'views' list")
    base = manifest_path.parent
    views = [read_matrix(base / p) for p in paths]
    return MultiViewDataset(tuple(views), tuple(doc.get("names") or ()))


def save_dataset(dataset: MultiViewDataset, directory, prefix: str = "view") -> Path:
    """Write one CSV per view plus ``manifest.json``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for d, v in enumerate(dataset.views):
        name = f"{prefix}{d}.csv"
        write_matrix(directory / name, v)
        files.append(name)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"views": files, "names": list(dataset.names)}, indent=2))
    return manifest


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def _mat(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _require(doc: dict, key: str, kind: str):
    if key not in doc:
        raise SchemaError(f"{kind} file is missing field {key!r}")
    return doc[key]


def _check_version(doc, kind):
    if not isinstance(doc, dict):
        raise SchemaError(f"{kind} file must hold a JSON object")
    version = _require(doc, "format_version", kind)
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported {kind} format_version {version!r}")


def _read_json(path, kind):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing {kind} file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{kind} file is not valid JSON: {exc}") from None


def model_to_dict(model: FittedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "shindica-model",
        "shared_count": model.shared_count,
        "lambda": model.lam,
        "nonlinearity": model.nonlinearity,
        "converged": model.converged,
        "objective_trace": list(model.objective_trace),
        "diagnostics": model.diagnostics,
        "views": [
            {
                "unmixing_whitened": _mat(W),
                "whitening_forward": _mat(t.forward),
                "whitening_inverse": _mat(t.inverse),
                "mean": _mat(t.mean),
                "eigenvalues": _mat(t.eigenvalues),
                "mixing_estimate": _mat(A),
            }
            for W, t, A in zip(model.unmixing_whitened, model.whitening, model.mixing_estimates)
        ],
    }


def model_from_dict(doc: dict) -> FittedModel:
    _check_version(doc, "model")
    views = _require(doc, "views", "model")
    Ws, ts = [], []
    for v in views:
        Ws.append(np.array(_require(v, "unmixing_whitened", "model"), dtype=np.float64))
        ts.append(
            WhiteningTransform(
                forward=_require(v, "whitening_forward", "model"),
                inverse=_require(v, "whitening_inverse", "model"),
                mean=_require(v, "mean", "model"),
                eigenvalues=_require(v, "eigenvalues", "model"),
            )
        )
    return FittedModel(
        unmixing_whitened=tuple(Ws),
        whitening=tuple(ts),
        shared_count=_require(doc, "shared_count", "model"),
        lam=_require(doc, "lambda", "model"),
        nonlinearity=_require(doc, "nonlinearity", "model"),
        objective_trace=tuple(doc.get("objective_trace", ())),
        converged=doc.get("converged", False),
        diagnostics=doc.get("diagnostics", {}),
    )


def save_model(model: FittedModel, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> FittedModel:
    return model_from_dict(_read_json(path, "model"))


def truth_to_dict(truth: GenerativeGroundTruth) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "shindica-ground-truth",
        "shared_count": truth.shared_count,
        "sample_count": int(truth.shared_sources.shape[1]),
        "noise_sigma": list(truth.noise_sigma),
        "mixing": [_mat(a) for a in truth.mixing],
        "shared_sources": _mat(truth.shared_sources),
        "individual_sources": [_mat(s) for s in truth.individual_sources],
    }


def truth_from_dict(doc: dict) -> GenerativeGroundTruth:
    _check_version(doc, "ground-truth")
    c = int(_require(doc, "shared_count", "ground-truth"))
    n = int(_require(doc, "sample_count", "ground-truth"))
    mixing = [np.array(a, dtype=np.float64) for a in _require(doc, "mixing", "ground-truth")]
    indiv = _require(doc, "individual_sources", "ground-truth")
    if len(indiv) != len(mixing):
        raise SchemaError("ground-truth needs one individual source block per view")
    return GenerativeGroundTruth(
        mixing=tuple(mixing),
        shared_sources=np.array(_require(doc, "shared_sources", "ground-truth"), dtype=np.float64).reshape(c, n),
        individual_sources=tuple(
            np.array(s, dtype=np.float64).reshape(a.shape[0] - c, n) for a, s in zip(mixing, indiv)
        ),
        noise_sigma=tuple(_require(doc, "noise_sigma", "ground-truth")),
        shared_count=c,
    )


def save_truth(truth: GenerativeGroundTruth, path) -> None:
    Path(path).write_text(json.dumps(truth_to_dict(truth)))


def load_truth(path) -> GenerativeGroundTruth:
    return truth_from_dict(_read_json(path, "ground-truth"))


def output_path(path) -> Path:
    """Resolve a relative output path against ``SHINDICA_OUTPUT_DIR`` when set."""
    path = Path(path)
    base = os.environ.get("SHINDICA_OUTPUT_DIR")
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def as_views(data) -> list:
    """Accept a dataset or a sequence of arrays and return a list of 2-d arrays."""
    if isinstance(data, MultiViewDataset):
        return list(data.views)
    return [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in data]
