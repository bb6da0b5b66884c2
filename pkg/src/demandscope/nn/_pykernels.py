"""Pure-numpy reference kernels (NHWC layout).

These are the fallback used when the compiled extension is unavailable. The
compiled kernels must agree with these bit for bit.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def im2col(x: np.ndarray, k: int, start: int = 0, stop: int = -1) -> np.ndarray:
    """Unfold ``k x k`` same-padded neighbourhoods into rows of (ky, kx, c).

    ``start``/``stop`` select a range of flattened (n, y, x) output rows.
    """
    n, h, w, c = x.shape
    if stop < 0:
        stop = n * h * w
    b0, b1 = start // (h * w), -(-stop // (h * w))
    xs = x[b0:b1]
    p = k // 2
    xp = np.zeros((xs.shape[0], h + 2 * p, w + 2 * p, c), dtype=x.dtype)
    xp[:, p:p + h, p:p + w, :] = xs
    cols = np.empty((xs.shape[0], h, w, k * k, c), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, :, ky * k + kx, :] = xp[:, ky:ky + h, kx:kx + w, :]
    cols = cols.reshape(-1, k * k * c)
    off = b0 * h * w
    return np.ascontiguousarray(cols[start - off:stop - off])


def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, h, w, c = x.shape
    win = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
    win = win.reshape(n, h // 2, w // 2, c, 4)
    idx = np.argmax(win, axis=-1).astype(np.uint8)
    out = np.take_along_axis(win, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(dout: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n, ho, wo, c = dout.shape
    onehot = idx[..., None] == np.arange(4, dtype=np.uint8)
    win = np.where(onehot, dout[..., None], np.zeros((), dtype=dout.dtype))
    dx = win.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(dx.reshape(n, ho * 2, wo * 2, c))
