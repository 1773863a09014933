"""A small convolutional network with natively implemented passes.

Architecture: two (conv -> relu -> maxpool) stages, a dense hidden layer,
and a softmax output. Forward and backward run on the kernels package, so
the hot loops use the compiled extension when available.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DataError, NumericError
from ..kernels import (
    conv2d_backward,
    conv2d_forward,
    maxpool2d_backward,
    maxpool2d_forward,
)
from .base import ClassifierBackend, SpectrogramDataset, stable_softmax
from .features import image_tensor_batch

PREDICT_CHUNK = 256


@dataclass(frozen=True)
class CnnArch:
    conv_channels: tuple[int, int] = (6, 12)
    kernel: int = 3
    pool: int = 2
    hidden: int = 48
    input_size: int = 32
    in_channels: int = 3

    def stage_sizes(self) -> tuple[int, int, int, int]:
        """Spatial sizes after conv1, pool1, conv2, pool2."""
        s1 = self.input_size - self.kernel + 1
        p1 = s1 // self.pool
        s2 = p1 - self.kernel + 1
        p2 = s2 // self.pool
        if p2 < 1:
            raise DataError(f"input_size {self.input_size} too small for this arch")
        return s1, p1, s2, p2

    @property
    def flat_dim(self) -> int:
        return self.conv_channels[1] * self.stage_sizes()[3] ** 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "CnnArch":
        doc = dict(doc)
        if "conv_channels" in doc:
            doc["conv_channels"] = tuple(doc["conv_channels"])
        return cls(**doc)


@dataclass(frozen=True)
class CnnHyper:
    lr: float = 0.2
    epochs: int = 20
    batch: int = 32
    seed: int = 0
    # subtract the training mean image and divide by the global std
    center_inputs: bool = True
    arch: CnnArch = field(default_factory=CnnArch)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["arch"] = self.arch.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CnnHyper":
        doc = dict(doc)
        if "arch" in doc:
            doc["arch"] = CnnArch.from_dict(doc["arch"])
        return cls(**doc)


class CnnModel(ClassifierBackend):
    """Trained (or freshly initialized) network over rendered images."""

    PARAM_NAMES = (
        "conv1_w", "conv1_b", "conv2_w", "conv2_b",
        "fc1_w", "fc1_b", "fc2_w", "fc2_b",
    )

    def __init__(
        self,
        identity: str,
        classes: tuple[str, ...],
        params: dict[str, np.ndarray],
        hyper: CnnHyper,
        loss_trace: list[float] | None = None,
        input_mean: np.ndarray | None = None,
        input_scale: float = 1.0,
    ):
        self.identity = identity
        self.classes = tuple(classes)
        self.params = {
            k: np.ascontiguousarray(v, dtype=np.float64) for k, v in params.items()
        }
        if set(self.params) != set(self.PARAM_NAMES):
            raise DataError(f"parameter set {sorted(self.params)} is incomplete")
        self.hyper = hyper
        self.loss_trace = list(loss_trace or [])
        arch = hyper.arch
        shape = (arch.in_channels, arch.input_size, arch.input_size)
        self.input_mean = (
            np.zeros(shape) if input_mean is None
            else np.ascontiguousarray(input_mean, dtype=np.float64)
        )
        self.input_scale = float(input_scale)

    @classmethod
    def initialize(
        cls, identity: str, classes: tuple[str, ...], hyper: CnnHyper
    ) -> "CnnModel":
        """He-style uniform initialization drawn from the seed; biases zero."""
        arch = hyper.arch
        rng = np.random.default_rng(hyper.seed)
        c1, c2 = arch.conv_channels
        k = arch.kernel

        def he_uniform(shape, fan_in):
            bound = np.sqrt(6.0 / fan_in)
            return rng.uniform(-bound, bound, size=shape)

        params = {
            "conv1_w": he_uniform((c1, arch.in_channels, k, k), arch.in_channels * k * k),
            "conv1_b": np.zeros(c1),
            "conv2_w": he_uniform((c2, c1, k, k), c1 * k * k),
            "conv2_b": np.zeros(c2),
            "fc1_w": he_uniform((arch.hidden, arch.flat_dim), arch.flat_dim),
            "fc1_b": np.zeros(arch.hidden),
            "fc2_w": he_uniform((len(classes), arch.hidden), arch.hidden),
            "fc2_b": np.zeros(len(classes)),
        }
        return cls(identity, classes, params, hyper)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        arch = self.hyper.arch
        expected = (arch.in_channels, arch.input_size, arch.input_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise DataError(f"input shape {x.shape} does not match (n, {expected})")
        return np.ascontiguousarray((x - self.input_mean) / self.input_scale)

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        p = self.params
        pool = self.hyper.arch.pool
        z1 = conv2d_forward(x, p["conv1_w"], p["conv1_b"])
        a1 = np.maximum(z1, 0.0)
        pool1, sw1 = maxpool2d_forward(a1, pool)
        z2 = conv2d_forward(pool1, p["conv2_w"], p["conv2_b"])
        a2 = np.maximum(z2, 0.0)
        pool2, sw2 = maxpool2d_forward(a2, pool)
        flat = pool2.reshape(x.shape[0], -1)
        h = flat @ p["fc1_w"].T + p["fc1_b"]
        hr = np.maximum(h, 0.0)
        logits = hr @ p["fc2_w"].T + p["fc2_b"]
        cache = {
            "x": x, "z1": z1, "a1": a1, "sw1": sw1, "pool1": pool1,
            "z2": z2, "a2": a2, "sw2": sw2, "pool2": pool2,
            "flat": flat, "h": h, "hr": hr,
        }
        return logits, cache

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(self._check_input(x))[0]

    def predict_proba(self, image_tensor: np.ndarray) -> np.ndarray:
        return stable_softmax(self.logits(image_tensor[None, ...]))[0]

    def predict_proba_images(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        chunks = [
            stable_softmax(self._forward(x[i : i + PREDICT_CHUNK])[0])
            for i in range(0, x.shape[0], PREDICT_CHUNK)
        ]
        return np.concatenate(chunks) if chunks else np.empty((0, self.class_count))

    def predict_proba_dataset(self, dataset: SpectrogramDataset) -> np.ndarray:
        self._check_dataset(dataset)
        x = image_tensor_batch(dataset.images, self.hyper.arch.input_size)
        return self.predict_proba_images(x)

    def loss_and_grads(
        self, x: np.ndarray, labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Cross-entropy loss and analytic gradients for every parameter."""
        x = self._check_input(x)
        labels = np.asarray(labels, dtype=np.int64)
        n = x.shape[0]
        p = self.params
        pool = self.hyper.arch.pool

        logits, cache = self._forward(x)
        zmax = logits.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        loss = float(np.mean(lse - logits[np.arange(n), labels]))

        g = stable_softmax(logits)
        g[np.arange(n), labels] -= 1.0
        g /= n

        grads: dict[str, np.ndarray] = {}
        grads["fc2_w"] = g.T @ cache["hr"]
        grads["fc2_b"] = g.sum(axis=0)
        g_hr = g @ p["fc2_w"]
        g_h = g_hr * (cache["h"] > 0)
        grads["fc1_w"] = g_h.T @ cache["flat"]
        grads["fc1_b"] = g_h.sum(axis=0)
        g_flat = g_h @ p["fc1_w"]
        g_pool2 = g_flat.reshape(cache["pool2"].shape)
        g_a2 = maxpool2d_backward(
            g_pool2, cache["sw2"], cache["a2"].shape[2], cache["a2"].shape[3], pool
        )
        g_z2 = g_a2 * (cache["z2"] > 0)
        g_pool1, grads["conv2_w"], grads["conv2_b"] = conv2d_backward(
            cache["pool1"], p["conv2_w"], g_z2
        )
        g_a1 = maxpool2d_backward(
            g_pool1, cache["sw1"], cache["a1"].shape[2], cache["a1"].shape[3], pool
        )
        g_z1 = g_a1 * (cache["z1"] > 0)
        _, grads["conv1_w"], grads["conv1_b"] = conv2d_backward(
            cache["x"], p["conv1_w"], g_z1
        )
        return loss, grads

    def parameter_groups(self) -> dict[str, np.ndarray]:
        return dict(self.params)


def train_cnn(
    images: np.ndarray,
    labels: np.ndarray,
    classes: tuple[str, ...],
    hyper: CnnHyper = CnnHyper(),
    identity: str = "cnn",
    allow_missing_classes: bool = False,
) -> CnnModel:
    """Train on (n, channels, size, size) image tensors; deterministic per seed.

    A zero-epoch call performs no fitting at all (no input centering
    statistics either) and returns the freshly initialized model.
    """
    images = np.ascontiguousarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if images.shape[0] != labels.size:
        raise DataError("images and labels have mismatched lengths")
    if not allow_missing_classes:
        present = np.bincount(labels, minlength=len(classes))
        if np.any(present == 0):
            missing = [i for i, c in enumerate(present) if c == 0]
            raise DataError(f"empty class(es) in training set: indices {missing}")

    model = CnnModel.initialize(identity, classes, hyper)
    if hyper.center_inputs and hyper.epochs > 0:
        model.input_mean = images.mean(axis=0)
        scale = float(images.std())
        model.input_scale = scale if scale > 1e-8 else 1.0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=hyper.seed, spawn_key=(1,)))
    n = images.shape[0]
    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, hyper.batch):
            idx = perm[start : start + hyper.batch]
            loss, grads = model.loss_and_grads(images[idx], labels[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            for name, grad in grads.items():
                model.params[name] -= hyper.lr * grad
            batch_losses.append(loss)
        model.loss_trace.append(float(np.mean(batch_losses)))
    return model


def train_cnn_on_dataset(
    dataset: SpectrogramDataset,
    hyper: CnnHyper = CnnHyper(),
    identity: str = "cnn",
) -> CnnModel:
    x = image_tensor_batch(dataset.images, hyper.arch.input_size)
    return train_cnn(x, dataset.labels, dataset.classes, hyper, identity)
