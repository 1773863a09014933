# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution and pooling kernels.

Same contracts as the numpy fallback in _conv_np: valid-mode stride-1
convolution, (N, C, H, W) activations, (F, C, KH, KW) filters, float64.
"""

import numpy as np

cimport numpy as cnp


def conv2d_forward(object x_in, object w_in, object b_in):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t F = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t OH = H - KH + 1, OW = W - KW + 1
    out_arr = np.empty((N, F, OH, OW), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t n, f, c, oy, ox, i, j
    cdef double acc
    for n in range(N):
        for f in range(F):
            for oy in range(OH):
                for ox in range(OW):
                    acc = b[f]
                    for c in range(C):
                        for i in range(KH):
                            for j in range(KW):
                                acc += x[n, c, oy + i, ox + j] * w[f, c, i, j]
                    out[n, f, oy, ox] = acc
    return out_arr


def conv2d_backward(object x_in, object w_in, object grad_out_in):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[:, :, :, ::1] go = np.ascontiguousarray(grad_out_in, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t F = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t OH = go.shape[2], OW = go.shape[3]

    gx_arr = np.zeros((N, C, H, W), dtype=np.float64)
    gw_arr = np.zeros((F, C, KH, KW), dtype=np.float64)
    gb_arr = np.zeros(F, dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr

    cdef Py_ssize_t n, f, c, oy, ox, i, j
    cdef double g
    for n in range(N):
        for f in range(F):
            for oy in range(OH):
                for ox in range(OW):
                    g = go[n, f, oy, ox]
                    gb[f] += g
                    for c in range(C):
                        for i in range(KH):
                            for j in range(KW):
                                gw[f, c, i, j] += g * x[n, c, oy + i, ox + j]
                                gx[n, c, oy + i, ox + j] += g * w[f, c, i, j]
    return gx_arr, gw_arr, gb_arr


def maxpool2d_forward(object x_in, int k):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t OH = H // k, OW = W // k
    out_arr = np.empty((N, C, OH, OW), dtype=np.float64)
    sw_arr = np.empty((N, C, OH, OW), dtype=np.int64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef long long[:, :, :, ::1] sw = sw_arr
    cdef Py_ssize_t n, c, oy, ox, i, j, best_idx
    cdef double best, v
    for n in range(N):
        for c in range(C):
            for oy in range(OH):
                for ox in range(OW):
                    best = x[n, c, oy * k, ox * k]
                    best_idx = 0
                    for i in range(k):
                        for j in range(k):
                            v = x[n, c, oy * k + i, ox * k + j]
                            if v > best:
                                best = v
                                best_idx = i * k + j
                    out[n, c, oy, ox] = best
                    sw[n, c, oy, ox] = best_idx
    return out_arr, sw_arr


def maxpool2d_backward(object grad_out_in, object switches_in,
                       Py_ssize_t in_h, Py_ssize_t in_w, int k):
    cdef double[:, :, :, ::1] go = np.ascontiguousarray(grad_out_in, dtype=np.float64)
    cdef long long[:, :, :, ::1] sw = np.ascontiguousarray(switches_in, dtype=np.int64)
    cdef Py_ssize_t N = go.shape[0], C = go.shape[1], OH = go.shape[2], OW = go.shape[3]
    gx_arr = np.zeros((N, C, in_h, in_w), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t n, c, oy, ox, idx
    for n in range(N):
        for c in range(C):
            for oy in range(OH):
                for ox in range(OW):
                    idx = sw[n, c, oy, ox]
                    gx[n, c, oy * k + idx // k, ox * k + idx % k] += go[n, c, oy, ox]
    return gx_arr
