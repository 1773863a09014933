"""Binary checkpoint format for trained models.

Layout: 7 magic bytes ``WPEDL/1``, a uint64-LE length-prefixed UTF-8 JSON
header (backend kind, identity, classes, hyperparameters, tensor order,
loss trace), then each tensor as uint32-LE ndim, uint64-LE dims, and raw
little-endian float64 data. Loading reproduces predictions bit-identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, CheckpointError, TruncatedCheckpointError, VersionMismatchError
from .cnn import CnnHyper, CnnModel
from .softmax import SoftmaxHyper, SoftmaxModel

MAGIC_PREFIX = b"WPEDL/"
FORMAT_VERSION = b"1"
MAGIC = MAGIC_PREFIX + FORMAT_VERSION


def _write_tensor(fh, tensor: np.ndarray) -> None:
    tensor = np.ascontiguousarray(tensor, dtype=np.float64)
    fh.write(struct.pack("<I", tensor.ndim))
    for dim in tensor.shape:
        fh.write(struct.pack("<Q", dim))
    fh.write(tensor.astype("<f8").tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedCheckpointError(
            f"expected {count} more bytes, file ended after {len(data)}"
        )
    return data


def _read_tensor(fh) -> np.ndarray:
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
    shape = tuple(struct.unpack("<Q", _read_exact(fh, 8))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = _read_exact(fh, count * 8)
    return np.frombuffer(data, dtype="<f8").reshape(shape).copy()


def save(model: SoftmaxModel | CnnModel, path: str | Path) -> Path:
    path = Path(path)
    if isinstance(model, SoftmaxModel):
        kind = "softmax"
        tensors = {
            "weights": model.weights,
            "bias": model.bias,
            "feature_mean": model.feature_mean,
            "feature_scale": model.feature_scale,
        }
        hyper = model.hyper.to_dict()
    elif isinstance(model, CnnModel):
        kind = "cnn"
        tensors = {name: model.params[name] for name in CnnModel.PARAM_NAMES}
        tensors["input_mean"] = model.input_mean
        tensors["input_scale"] = np.array(model.input_scale)
        hyper = model.hyper.to_dict()
    else:
        raise CheckpointError(f"cannot checkpoint object of type {type(model).__name__}")

    header = {
        "backend": kind,
        "identity": model.identity,
        "classes": list(model.classes),
        "hyper": hyper,
        "tensor_order": list(tensors),
        "loss_trace": model.loss_trace,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for tensor in tensors.values():
            _write_tensor(fh, tensor)
    return path


def load(path: str | Path) -> SoftmaxModel | CnnModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC))
        if magic[: len(MAGIC_PREFIX)] != MAGIC_PREFIX:
            raise BadMagicError(f"not a checkpoint file: {path}")
        if magic[len(MAGIC_PREFIX) :] != FORMAT_VERSION:
            got = magic[len(MAGIC_PREFIX) :].decode("ascii", "replace")
            raise VersionMismatchError(
                f"checkpoint format version {got} is not supported (expected "
                f"{FORMAT_VERSION.decode('ascii')})"
            )
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8))
        try:
            header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc

        tensors = {name: _read_tensor(fh) for name in header["tensor_order"]}
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("checkpoint has trailing bytes after payload")

    kind = header.get("backend")
    classes = tuple(header["classes"])
    if kind == "softmax":
        return SoftmaxModel(
            identity=header["identity"],
            classes=classes,
            weights=tensors["weights"],
            bias=tensors["bias"],
            hyper=SoftmaxHyper(**header["hyper"]),
            loss_trace=header.get("loss_trace"),
            feature_mean=tensors.get("feature_mean"),
            feature_scale=tensors.get("feature_scale"),
        )
    if kind == "cnn":
        input_mean = tensors.pop("input_mean", None)
        input_scale = tensors.pop("input_scale", None)
        return CnnModel(
            identity=header["identity"],
            classes=classes,
            params=tensors,
            hyper=CnnHyper.from_dict(header["hyper"]),
            loss_trace=header.get("loss_trace"),
            input_mean=input_mean,
            input_scale=1.0 if input_scale is None else float(input_scale),
        )
    raise CheckpointError(f"unknown backend kind in checkpoint: {kind!r}")
