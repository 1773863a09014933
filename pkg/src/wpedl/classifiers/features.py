"""Adapters from spectrograms and rendered images to classifier inputs.

The linear backend consumes downsampled flattened log-magnitude matrices;
the CNN consumes resized RGB tensors. Both adapters are deterministic, so
identical corpora give identical training inputs.
"""

from __future__ import annotations

import numpy as np

from ..render import SpectralImage, bilinear_resize, normalized_log_magnitude
from ..stft import Spectrogram


def spectrogram_features(spec: Spectrogram, size: int, db_floor: float = -80.0) -> np.ndarray:
    """Flattened size x size view of the normalized log magnitude."""
    return bilinear_resize(normalized_log_magnitude(spec, db_floor), size, size).ravel()


def spectrogram_feature_matrix(
    specs: list[Spectrogram], size: int, db_floor: float = -80.0
) -> np.ndarray:
    return np.stack([spectrogram_features(s, size, db_floor) for s in specs])


def image_tensor(image: SpectralImage | np.ndarray, size: int) -> np.ndarray:
    """(3, size, size) float tensor in [0, 1] from a rendered image."""
    pixels = image.pixels if isinstance(image, SpectralImage) else np.asarray(image)
    scaled = pixels.astype(np.float64) / 255.0
    if pixels.shape[0] == size and pixels.shape[1] == size:
        return np.ascontiguousarray(scaled.transpose(2, 0, 1))
    channels = [bilinear_resize(scaled[:, :, c], size, size) for c in range(3)]
    return np.ascontiguousarray(np.stack(channels))


def image_tensor_batch(images: list[SpectralImage], size: int) -> np.ndarray:
    return np.stack([image_tensor(im, size) for im in images])
