"""Fault-diagnosis toolkit: spectrogram features, a classifier pool, and
tanh-weighted probability fusion for multi-class motor-fault decisions."""

__version__ = "0.1.0"

from .kernels import KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
