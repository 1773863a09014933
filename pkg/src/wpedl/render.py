"""Rendering spectrograms as fixed-size RGB images.

Mapping: v = 20*log10(magnitude + eps) is clipped to the db_floor window
below its maximum, the clipped values are autoscaled onto [0, 1] (a constant
matrix maps to 0), bilinearly resampled to the target square size, and sent
through a colormap lookup table. Row 0 of the image is frequency bin 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ._viridis_data import VIRIDIS_TABLE
from .errors import ConfigError
from .stft import Spectrogram, StftParams

LOG_EPS = 1e-10

COLORMAPS: dict[str, np.ndarray] = {
    "viridis": np.asarray(VIRIDIS_TABLE, dtype=np.float64),
    "gray": np.repeat(np.linspace(0.0, 1.0, 256)[:, None], 3, axis=1),
}


@dataclass(frozen=True)
class RenderParams:
    image_size: int = 224
    db_floor: float = -80.0
    colormap: str = "viridis"

    def __post_init__(self):
        if self.image_size < 1:
            raise ConfigError("image_size must be positive")
        if self.db_floor == 0:
            raise ConfigError("db_floor must be nonzero")
        if self.colormap not in COLORMAPS:
            raise ConfigError(f"unknown colormap '{self.colormap}'")

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "db_floor": self.db_floor,
            "colormap": self.colormap,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RenderParams":
        known = {"image_size", "db_floor", "colormap"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown render field(s): {sorted(unknown)}")
        return cls(**{k: doc[k] for k in known & set(doc)})


@dataclass(frozen=True)
class SpectralImage:
    """Rendered square RGB image plus the provenance needed to recompute it."""

    pixels: np.ndarray
    colormap: str
    db_floor: float
    stft_params: StftParams
    sample_rate_hz: float
    source_ref: tuple[int, int] = (-1, 0)
    label: str | None = None

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        object.__setattr__(self, "pixels", px)
        if px.ndim != 3 or px.shape[0] != px.shape[1] or px.shape[2] != 3:
            raise ValueError(f"pixels must be square HxWx3, got {px.shape}")

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def sidecar_dict(self) -> dict:
        return {
            "stft": self.stft_params.to_dict(),
            "render": {
                "image_size": self.size,
                "db_floor": self.db_floor,
                "colormap": self.colormap,
            },
            "sample_rate_hz": self.sample_rate_hz,
            "source": {"entry": self.source_ref[0], "offset": self.source_ref[1]},
            "label": self.label,
        }


def bilinear_resize(matrix: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2-D matrix with half-pixel-centered bilinear interpolation."""
    a = np.asarray(matrix, dtype=np.float64)
    in_h, in_w = a.shape

    def axis_coords(n_out: int, n_in: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, wy = axis_coords(out_h, in_h)
    x0, x1, wx = axis_coords(out_w, in_w)
    wy = wy[:, None]
    wx = wx[None, :]
    top = a[np.ix_(y0, x0)] * (1 - wx) + a[np.ix_(y0, x1)] * wx
    bot = a[np.ix_(y1, x0)] * (1 - wx) + a[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def normalized_log_magnitude(spec: Spectrogram, db_floor: float = -80.0) -> np.ndarray:
    """Log-magnitude clipped to the db_floor window and autoscaled to [0, 1]."""
    v = 20.0 * np.log10(spec.magnitude + LOG_EPS)
    vmax = v.max()
    clipped = np.clip(v, vmax - abs(db_floor), vmax)
    span = clipped.max() - clipped.min()
    if span == 0.0:
        return np.zeros_like(clipped)
    return (clipped - clipped.min()) / span


def render(
    spec: Spectrogram,
    image_size: int = 224,
    db_floor: float = -80.0,
    colormap: str = "viridis",
    *,
    label: str | None = None,
    source_ref: tuple[int, int] | None = None,
) -> SpectralImage:
    """Render a spectrogram into a square 8-bit RGB image."""
    if spec.magnitude.size == 0:
        raise ValueError("cannot render an empty spectrogram")
    if colormap not in COLORMAPS:
        raise ConfigError(f"unknown colormap '{colormap}'")
    norm = normalized_log_magnitude(spec, db_floor)
    resized = bilinear_resize(norm, image_size, image_size)
    table = COLORMAPS[colormap]
    idx = np.clip(np.round(resized * 255.0), 0, 255).astype(np.intp)
    rgb = np.round(table[idx] * 255.0).astype(np.uint8)
    return SpectralImage(
        pixels=rgb,
        colormap=colormap,
        db_floor=db_floor,
        stft_params=spec.params,
        sample_rate_hz=spec.sample_rate_hz,
        source_ref=source_ref if source_ref is not None else (-1, 0),
        label=label,
    )


def export_png(image: SpectralImage, path: str | Path) -> Path:
    """Write an 8-bit non-interlaced RGB PNG."""
    path = Path(path)
    try:
        Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write PNG to {path}: {exc}") from exc
    return path


def write_sidecar(image: SpectralImage, png_path: str | Path, **extra) -> Path:
    """Write the JSON sidecar describing how a PNG was produced."""
    png_path = Path(png_path)
    doc = image.sidecar_dict()
    doc.update(extra)
    sidecar = png_path.with_suffix(".json")
    sidecar.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_png(path: str | Path) -> np.ndarray:
    """Read a PNG back as an HxWx3 uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
