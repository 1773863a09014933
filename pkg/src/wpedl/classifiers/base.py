"""Uniform probabilistic-classifier interface and the dataset container.

Every backend maps samples to probability vectors: length-C, entries in
[0, 1], summing to 1 within 1e-9. A pool of backends with distinct
identities is the unit the ensemble operates on.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..render import SpectralImage
from ..stft import Spectrogram

PROB_SUM_TOL = 1e-9


def validate_probability_vector(p: np.ndarray, class_count: int | None = None) -> np.ndarray:
    """Check the probability-vector contract; returns the vector as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DataError(f"probability vector must be 1-D, got shape {p.shape}")
    if class_count is not None and p.size != class_count:
        raise DataError(f"expected {class_count} classes, got {p.size}")
    if p.size < 2:
        raise DataError("probability vector needs at least 2 classes")
    if not np.all(np.isfinite(p)):
        raise DataError("probability vector contains non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DataError("probability entries must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        raise DataError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


@dataclass
class SpectrogramDataset:
    """Aligned per-sample views of one split: raw spectrograms, rendered
    images, integer labels, and stable sample ids."""

    spectrograms: list[Spectrogram]
    images: list[SpectralImage]
    labels: np.ndarray
    sample_ids: list[str]
    classes: tuple[str, ...]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.spectrograms)
        if not (len(self.images) == self.labels.size == len(self.sample_ids) == n):
            raise DataError("dataset views have mismatched lengths")

    def __len__(self) -> int:
        return len(self.sample_ids)


class ClassifierBackend(ABC):
    """A named probability source over a fixed class list."""

    identity: str
    classes: tuple[str, ...]

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @abstractmethod
    def predict_proba_dataset(self, dataset: SpectrogramDataset) -> np.ndarray:
        """Probability matrix (n_samples, class_count) for a dataset."""

    def _check_dataset(self, dataset: SpectrogramDataset) -> None:
        if dataset.classes != self.classes:
            raise DataError(
                f"dataset classes {dataset.classes} do not match "
                f"model classes {self.classes}"
            )


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-shift stabilization."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
