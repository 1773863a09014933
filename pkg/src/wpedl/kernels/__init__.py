"""Hot-loop kernels with import-time backend selection.

The compiled Cython extension is preferred when built; otherwise the numpy
implementation in _conv_np is used. Set WPEDL_KERNELS=numpy or =cython to
force a backend (forcing cython raises if the extension is missing).
Both backends implement the same contracts; `python -m wpedl.kernels.bench`
compares their throughput.
"""

from __future__ import annotations

import os

from . import _conv_np

_forced = os.environ.get("WPEDL_KERNELS", "").strip().lower()
if _forced not in ("", "numpy", "cython"):
    raise ValueError(f"WPEDL_KERNELS must be 'numpy' or 'cython', got '{_forced}'")

if _forced == "numpy":
    _impl = _conv_np
    KERNEL_BACKEND = "numpy"
else:
    try:
        from . import _conv_cy as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _conv_np
        KERNEL_BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool2d_forward = _impl.maxpool2d_forward
maxpool2d_backward = _impl.maxpool2d_backward

__all__ = [
    "KERNEL_BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2d_forward",
    "maxpool2d_backward",
]
