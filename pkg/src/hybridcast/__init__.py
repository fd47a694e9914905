"""Decomposition-augmented temporal convolutional forecasting toolkit."""

from . import (
    autodiff,
    checkpoint,
    cli,
    config,
    datapipe,
    decomposition,
    evaluation,
    experiment,
    models,
    synthetic,
    training,
)

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "checkpoint",
    "cli",
    "config",
    "datapipe",
    "decomposition",
    "evaluation",
    "experiment",
    "models",
    "synthetic",
    "training",
    "__version__",
]
