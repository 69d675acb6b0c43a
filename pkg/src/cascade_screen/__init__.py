"""Questionnaire-based binary risk screening with from-scratch learners and cascades."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CascadeScreenError,
    EmptyDatasetError,
    GridSearchError,
    InsufficientClassError,
    InvalidInputError,
    RowError,
    SchemaError,
    SpecValidationError,
    TrainingError,
    UndefinedSkewError,
)
from .questionnaire import FEATURE_NAMES, FeatureVector, ParticipantRecord, encode_record  # noqa: E402
from .dataset import Dataset, load_csv, stratified_kfold  # noqa: E402

__all__ = [
    "__version__",
    "CascadeScreenError",
    "EmptyDatasetError",
    "GridSearchError",
    "InsufficientClassError",
    "InvalidInputError",
    "RowError",
    "SchemaError",
    "SpecValidationError",
    "TrainingError",
    "UndefinedSkewError",
    "FEATURE_NAMES",
    "FeatureVector",
    "ParticipantRecord",
    "encode_record",
    "Dataset",
    "load_csv",
    "stratified_kfold",
]
