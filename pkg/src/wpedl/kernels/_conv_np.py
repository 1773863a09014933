"""Numpy fallback kernels: valid-mode convolution and max pooling.

Used when the compiled extension is unavailable. Layouts match the compiled
kernels: activations (N, C, H, W), filters (F, C, KH, KW), float64.
"""

from __future__ import annotations

import numpy as np


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(N, C, H, W) -> (N, OH, OW, C*kh*kw) patch matrix."""
    n, c, _, _ = x.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    oh, ow = windows.shape[2], windows.shape[3]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh, ow, c * kh * kw)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    f, c, kh, kw = w.shape
    cols = _im2col(x, kh, kw)
    out = cols @ w.reshape(f, c * kh * kw).T + b
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    n, _, oh, ow = grad_out.shape
    f, c, kh, kw = w.shape

    grad_b = grad_out.sum(axis=(0, 2, 3))

    cols = _im2col(x, kh, kw).reshape(n * oh * ow, c * kh * kw)
    go_flat = grad_out.transpose(0, 2, 3, 1).reshape(n * oh * ow, f)
    grad_w = (go_flat.T @ cols).reshape(f, c, kh, kw)

    # full correlation of grad_out with the rotated filters gives grad_x
    padded = np.pad(grad_out, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    w_rot = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    cols_go = _im2col(padded, kh, kw)
    grad_x = cols_go @ w_rot.reshape(c, f * kh * kw).T
    return (
        np.ascontiguousarray(grad_x.transpose(0, 3, 1, 2)),
        grad_w,
        grad_b,
    )


def maxpool2d_forward(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pool kxk windows with stride k; trailing rows/cols that do not fill a
    window are dropped. Returns the pooled values and, per window, the
    row-major index of the first maximum (for the backward pass).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    oh, ow = h // k, w // k
    cropped = x[:, :, : oh * k, : ow * k]
    windows = (
        cropped.reshape(n, c, oh, k, ow, k)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh, ow, k * k)
    )
    switches = windows.argmax(axis=-1).astype(np.int64)
    out = np.take_along_axis(windows, switches[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), switches


def maxpool2d_backward(
    grad_out: np.ndarray, switches: np.ndarray, in_h: int, in_w: int, k: int
) -> np.ndarray:
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    n, c, oh, ow = grad_out.shape
    grad_windows = np.zeros((n, c, oh, ow, k * k))
    np.put_along_axis(grad_windows, switches[..., None], grad_out[..., None], axis=-1)
    grad_x = np.zeros((n, c, in_h, in_w))
    grad_x[:, :, : oh * k, : ow * k] = (
        grad_windows.reshape(n, c, oh, ow, k, k)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh * k, ow * k)
    )
    return grad_x
