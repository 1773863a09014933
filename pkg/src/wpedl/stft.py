"""Short-time Fourier transform of windowed segments.

The transform of frame m at bin k is
    X(m, k) = sum_{n=0}^{N-1} x[m*H + n] * w[n] * exp(-i 2 pi k n / P)
with window length N, hop H, and zero-padded FFT length P; only the
one-sided magnitude (P/2 + 1 bins) is kept, since inputs are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TooShortError
from .signal_io import TimeSeriesSegment

WINDOW_FUNCTIONS = ("hann", "hamming", "rectangular")


def window_vector(name: str, length: int) -> np.ndarray:
    """Periodic analysis window of the given length."""
    n = np.arange(length)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / length)
    if name == "rectangular":
        return np.ones(length)
    raise ConfigError(f"unknown window function '{name}'")


@dataclass(frozen=True)
class StftParams:
    window_len: int = 256
    hop: int = 64
    window_fn: str = "hann"
    fft_pad: int = 256

    def __post_init__(self):
        if not (1 <= self.hop <= self.window_len <= self.fft_pad):
            raise ConfigError(
                f"need 1 <= hop <= window_len <= fft_pad, got "
                f"hop={self.hop} window_len={self.window_len} fft_pad={self.fft_pad}"
            )
        if self.fft_pad & (self.fft_pad - 1):
            raise ConfigError(f"fft_pad must be a power of two, got {self.fft_pad}")
        if self.window_fn not in WINDOW_FUNCTIONS:
            raise ConfigError(f"unknown window function '{self.window_fn}'")

    @property
    def freq_bins(self) -> int:
        return self.fft_pad // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        return (n_samples - self.window_len) // self.hop + 1

    def to_dict(self) -> dict:
        return {
            "window_len": self.window_len,
            "hop": self.hop,
            "window_fn": self.window_fn,
            "fft_pad": self.fft_pad,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StftParams":
        known = {"window_len", "hop", "window_fn", "fft_pad"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown stft field(s): {sorted(unknown)}")
        return cls(**{k: doc[k] for k in known & set(doc)})


@dataclass(frozen=True)
class Spectrogram:
    """One-sided magnitude matrix, frequency bins by time frames."""

    magnitude: np.ndarray
    params: StftParams
    sample_rate_hz: float

    def __post_init__(self):
        mag = np.ascontiguousarray(self.magnitude, dtype=np.float64)
        object.__setattr__(self, "magnitude", mag)
        if mag.ndim != 2:
            raise ValueError("magnitude must be a 2-D matrix")
        if mag.shape[0] != self.params.freq_bins:
            raise ValueError(
                f"magnitude has {mag.shape[0]} bins, params imply {self.params.freq_bins}"
            )
        if not np.all(np.isfinite(mag)) or np.any(mag < 0):
            raise ValueError("magnitude entries must be finite and nonnegative")

    @property
    def frames(self) -> int:
        return self.magnitude.shape[1]


def stft(segment: TimeSeriesSegment | np.ndarray, params: StftParams,
         sample_rate_hz: float | None = None) -> Spectrogram:
    """Magnitude STFT of a segment (or raw vector plus explicit sample rate)."""
    if isinstance(segment, TimeSeriesSegment):
        x = segment.samples
        rate = segment.sample_rate_hz
    else:
        x = np.asarray(segment, dtype=np.float64)
        rate = float(sample_rate_hz if sample_rate_hz is not None else 1.0)

    n, hop = params.window_len, params.hop
    if x.size < n:
        raise TooShortError(
            f"segment has {x.size} samples, shorter than the {n}-sample window"
        )
    frames = params.frame_count(x.size)
    w = window_vector(params.window_fn, n)
    windowed = np.lib.stride_tricks.sliding_window_view(x, n)[:: hop][:frames] * w
    spectrum = np.fft.rfft(windowed, n=params.fft_pad, axis=1)
    return Spectrogram(
        magnitude=np.abs(spectrum).T, params=params, sample_rate_hz=rate
    )
