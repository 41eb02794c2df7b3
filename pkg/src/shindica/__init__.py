"""Multi-view linear ICA with shared and individual sources."""

__version__ = "0.1.0"

from .datamodel import (  # noqa: E402
    DataError,
    FittedModel,
    GenerativeGroundTruth,
    MultiViewDataset,
    NumericalError,
    SchemaError,
    WhiteningTransform,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
)
from .estimator import FitConfig, extract_shared, fit, transform  # noqa: E402
from .metrics import amari_distance, hungarian, mcc  # noqa: E402
from .model_selection import nre, select_shared_count  # noqa: E402
from .simulate import SimulationConfig, simulate  # noqa: E402

__all__ = [
    "DataError",
    "FitConfig",
    "FittedModel",
    "GenerativeGroundTruth",
    "MultiViewDataset",
    "NumericalError",
    "SchemaError",
    "SimulationConfig",
    "WhiteningTransform",
    "amari_distance",
    "extract_shared",
    "fit",
    "hungarian",
    "load_dataset",
    "load_model",
    "mcc",
    "nre",
    "save_dataset",
    "save_model",
    "select_shared_count",
    "simulate",
    "transform",
]
