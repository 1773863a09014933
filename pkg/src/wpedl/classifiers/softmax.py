"""Multinomial logistic regression trained by mini-batch gradient descent.

Loss is cross-entropy (log-sum-exp stabilized, probability floor 1e-12
applied to the reported value only) plus an L2 penalty on the weights;
the optimizer is plain SGD for determinism and easy gradient checking.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DataError, NumericError
from .base import ClassifierBackend, SpectrogramDataset, stable_softmax
from .features import spectrogram_feature_matrix

LOSS_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class SoftmaxHyper:
    lr: float = 0.3
    epochs: int = 40
    batch: int = 32
    l2: float = 1e-4
    seed: int = 0
    # standardize features with training-set statistics (stored in the model)
    standardize: bool = True
    # extraction settings used when the model consumes spectrogram datasets
    feature_size: int = 16
    db_floor: float = -80.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_training_set(
    features: np.ndarray, labels: np.ndarray, class_count: int, require_all: bool
):
    if features.ndim != 2:
        raise DataError(f"features must be (n, d), got shape {features.shape}")
    if labels.shape != (features.shape[0],):
        raise DataError("labels must align with feature rows")
    if require_all:
        present = np.bincount(labels, minlength=class_count)
        if np.any(present == 0):
            missing = [i for i, c in enumerate(present) if c == 0]
            raise DataError(f"empty class(es) in training set: indices {missing}")


class SoftmaxModel(ClassifierBackend):
    """Linear classifier over flattened spectrogram features."""

    def __init__(
        self,
        identity: str,
        classes: tuple[str, ...],
        weights: np.ndarray,
        bias: np.ndarray,
        hyper: SoftmaxHyper,
        loss_trace: list[float] | None = None,
        feature_mean: np.ndarray | None = None,
        feature_scale: np.ndarray | None = None,
    ):
        self.identity = identity
        self.classes = tuple(classes)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(bias, dtype=np.float64)
        self.hyper = hyper
        self.loss_trace = list(loss_trace or [])
        dim = self.weights.shape[1]
        self.feature_mean = (
            np.zeros(dim) if feature_mean is None
            else np.ascontiguousarray(feature_mean, dtype=np.float64)
        )
        self.feature_scale = (
            np.ones(dim) if feature_scale is None
            else np.ascontiguousarray(feature_scale, dtype=np.float64)
        )

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def _transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.input_dim:
            raise DataError(
                f"feature dimension {features.shape[-1]} does not match "
                f"model input dimension {self.input_dim}"
            )
        return (features - self.feature_mean) / self.feature_scale

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self._transform(features) @ self.weights.T + self.bias

    def predict_proba(self, feature_vector: np.ndarray) -> np.ndarray:
        return stable_softmax(self.logits(np.atleast_2d(feature_vector)))[0]

    def predict_proba_features(self, features: np.ndarray) -> np.ndarray:
        return stable_softmax(self.logits(features))

    def predict_proba_dataset(self, dataset: SpectrogramDataset) -> np.ndarray:
        self._check_dataset(dataset)
        feats = spectrogram_feature_matrix(
            dataset.spectrograms, self.hyper.feature_size, self.hyper.db_floor
        )
        return self.predict_proba_features(feats)

    def loss_and_grads(
        self, features: np.ndarray, labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Cross-entropy + L2 loss and its analytic parameter gradients."""
        transformed = self._transform(features)
        labels = np.asarray(labels, dtype=np.int64)
        n = transformed.shape[0]
        z = transformed @ self.weights.T + self.bias
        zmax = z.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        logp_true = z[np.arange(n), labels] - lse
        ce = -float(np.mean(np.maximum(logp_true, np.log(LOSS_PROB_FLOOR))))
        loss = ce + 0.5 * self.hyper.l2 * float(np.sum(self.weights**2))

        probs = stable_softmax(z)
        g = probs
        g[np.arange(n), labels] -= 1.0
        g /= n
        grad_w = g.T @ transformed + self.hyper.l2 * self.weights
        grad_b = g.sum(axis=0)
        return loss, {"weights": grad_w, "bias": grad_b}

    def parameter_groups(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}


def train_softmax(
    features: np.ndarray,
    labels: np.ndarray,
    classes: tuple[str, ...],
    hyper: SoftmaxHyper = SoftmaxHyper(),
    identity: str = "softmax",
    allow_missing_classes: bool = False,
) -> SoftmaxModel:
    """Train from labeled feature vectors; deterministic for a fixed seed.

    A zero-epoch call performs no fitting at all (no standardization
    statistics either) and returns the freshly initialized model.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_training_set(features, labels, len(classes), not allow_missing_classes)

    n, dim = features.shape
    rng = np.random.default_rng(hyper.seed)
    bound = np.sqrt(6.0 / dim)
    model = SoftmaxModel(
        identity=identity,
        classes=classes,
        weights=rng.uniform(-bound, bound, size=(len(classes), dim)),
        bias=np.zeros(len(classes)),
        hyper=hyper,
    )
    if hyper.standardize and hyper.epochs > 0:
        model.feature_mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale[scale < 1e-8] = 1.0
        model.feature_scale = scale

    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, hyper.batch):
            idx = perm[start : start + hyper.batch]
            loss, grads = model.loss_and_grads(features[idx], labels[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            model.weights -= hyper.lr * grads["weights"]
            model.bias -= hyper.lr * grads["bias"]
            batch_losses.append(loss)
        model.loss_trace.append(float(np.mean(batch_losses)))
    return model


def train_softmax_on_dataset(
    dataset: SpectrogramDataset,
    hyper: SoftmaxHyper = SoftmaxHyper(),
    identity: str = "softmax",
) -> SoftmaxModel:
    """Convenience wrapper: extract spectrogram features, then train."""
    feats = spectrogram_feature_matrix(
        dataset.spectrograms, hyper.feature_size, hyper.db_floor
    )
    return train_softmax(feats, dataset.labels, dataset.classes, hyper, identity)
