"""Classifier pool: trainable native backends plus an external import backend."""

from .base import (
    ClassifierBackend,
    SpectrogramDataset,
    stable_softmax,
    validate_probability_vector,
)
from .checkpoint import load, save
from .cnn import CnnArch, CnnHyper, CnnModel, train_cnn, train_cnn_on_dataset
from .external import ExternalProbabilityBackend, import_external
from .softmax import SoftmaxHyper, SoftmaxModel, train_softmax, train_softmax_on_dataset

__all__ = [
    "ClassifierBackend",
    "SpectrogramDataset",
    "stable_softmax",
    "validate_probability_vector",
    "save",
    "load",
    "CnnArch",
    "CnnHyper",
    "CnnModel",
    "train_cnn",
    "train_cnn_on_dataset",
    "ExternalProbabilityBackend",
    "import_external",
    "SoftmaxHyper",
    "SoftmaxModel",
    "train_softmax",
    "train_softmax_on_dataset",
]
