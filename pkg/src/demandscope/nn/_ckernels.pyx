# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled NHWC kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

ctypedef fused real:
    float
    double

BACKEND = "cython"


def im2col(real[:, :, :, ::1] x, int k, Py_ssize_t start=0, Py_ssize_t stop=-1):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t p = k // 2
    if stop < 0:
        stop = n * h * w
    dtype = np.float32 if real is float else np.float64
    out = np.empty((stop - start, k * k * c), dtype=dtype)
    cdef real[:, ::1] cols = out
    cdef Py_ssize_t r, b, y, xx, ky, kx, ch, base, sy, sx, rem
    with nogil:
        for r in range(start, stop):
            b = r // (h * w)
            rem = r - b * h * w
            y = rem // w
            xx = rem - y * w
            for ky in range(k):
                sy = y + ky - p
                for kx in range(k):
                    sx = xx + kx - p
                    base = (ky * k + kx) * c
                    if sy < 0 or sy >= h or sx < 0 or sx >= w:
                        for ch in range(c):
                            cols[r - start, base + ch] = 0
                    else:
                        for ch in range(c):
                            cols[r - start, base + ch] = x[b, sy, sx, ch]
    return out


def maxpool2_forward(real[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], ho = x.shape[1] // 2, wo = x.shape[2] // 2, c = x.shape[3]
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n, ho, wo, c), dtype=dtype)
    idx = np.empty((n, ho, wo, c), dtype=np.uint8)
    cdef real[:, :, :, ::1] o = out
    cdef cnp.uint8_t[:, :, :, ::1] ix = idx
    cdef Py_ssize_t b, y, xx, ch
    cdef real best, v
    cdef cnp.uint8_t arg
    with nogil:
        for b in range(n):
            for y in range(ho):
                for xx in range(wo):
                    for ch in range(c):
                        best = x[b, 2 * y, 2 * xx, ch]
                        arg = 0
                        v = x[b, 2 * y, 2 * xx + 1, ch]
                        if v > best:
                            best = v
                            arg = 1
                        v = x[b, 2 * y + 1, 2 * xx, ch]
                        if v > best:
                            best = v
                            arg = 2
                        v = x[b, 2 * y + 1, 2 * xx + 1, ch]
                        if v > best:
                            best = v
                            arg = 3
                        o[b, y, xx, ch] = best
                        ix[b, y, xx, ch] = arg
    return out, idx


def maxpool2_backward(real[:, :, :, ::1] dout, cnp.uint8_t[:, :, :, ::1] idx):
    cdef Py_ssize_t n = dout.shape[0], ho = dout.shape[1], wo = dout.shape[2], c = dout.shape[3]
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((n, 2 * ho, 2 * wo, c), dtype=dtype)
    cdef real[:, :, :, ::1] dx = out
    cdef Py_ssize_t b, y, xx, ch
    cdef cnp.uint8_t a
    with nogil:
        for b in range(n):
            for y in range(ho):
                for xx in range(wo):
                    for ch in range(c):
                        a = idx[b, y, xx, ch]
                        dx[b, 2 * y + (a >> 1), 2 * xx + (a & 1), ch] = dout[b, y, xx, ch]
    return out
