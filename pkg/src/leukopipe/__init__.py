"""Leukocyte-image classification pipeline.

Coupled transformer/convolutional feature extraction, graph-based feature
reconstruction, sine-cosine feature selection with adaptive hill-climbing
refinement, and a hierarchical classifier, wired together behind a
deterministic batch CLI.
"""

from .errors import (
    ContractError,
    DataError,
    DimensionError,
    FitnessError,
    GraphError,
    IngestionError,
    InsufficientBatchError,
    ParameterError,
    ReportError,
    StageError,
    TrainingError,
)
from .tensor import Tensor, backward, no_grad, tape

__all__ = [
    "Tensor",
    "backward",
    "no_grad",
    "tape",
    "ContractError",
    "DataError",
    "DimensionError",
    "FitnessError",
    "GraphError",
    "IngestionError",
    "InsufficientBatchError",
    "ParameterError",
    "ReportError",
    "StageError",
    "TrainingError",
]

__version__ = "0.1.0"
