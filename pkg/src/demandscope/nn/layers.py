"""Layer descriptors with their forward and backward rules.

All image tensors are NHWC. Shapes passed around without the batch axis are
``(H, W, C)`` for feature maps and ``(D,)`` for vectors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, ClassVar

import numpy as np

from ..errors import ShapeMismatch
from . import kernels

# rows of the unfolded matrix processed per GEMM; keeps the buffer cache-resident
CHUNK_ROWS = 2048


@dataclass(frozen=True)
class Layer:
    name: str

    kind: ClassVar[str] = "layer"

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def forward(self, params, x, train, rng):
        """Return ``(y, cache)``."""
        raise NotImplementedError

    def backward(self, params, x, y, cache, dy, need_dx):
        """Return ``(dx or None, {param_name: grad})``."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, **asdict(self)}


def _expect_map(layer: Layer, in_shape) -> tuple[int, int, int]:
    if len(in_shape) != 3:
        raise ShapeMismatch(f"{layer.name}: expected a feature map, got shape {in_shape}")
    return in_shape


@dataclass(frozen=True)
class Conv2D(Layer):
    in_ch: int
    out_ch: int
    kernel: int = 3

    kind: ClassVar[str] = "conv2d"

    def param_shapes(self):
        k = self.kernel
        return {f"{self.name}.w": (k, k, self.in_ch, self.out_ch), f"{self.name}.b": (self.out_ch,)}

    def output_shape(self, in_shape):
        h, w, c = _expect_map(self, in_shape)
        if c != self.in_ch:
            raise ShapeMismatch(f"{self.name}: expects {self.in_ch} channels, got {c}")
        return (h, w, self.out_ch)

    def forward(self, params, x, train, rng):
        n, h, w, c = x.shape
        k = self.kernel
        wmat = params[f"{self.name}.w"].reshape(k * k * c, self.out_ch)
        b = params[f"{self.name}.b"]
        rows = n * h * w
        if k == 1:
            y = x.reshape(rows, c) @ wmat
        else:
            y = np.empty((rows, self.out_ch), dtype=x.dtype)
            for s in range(0, rows, CHUNK_ROWS):
                e = min(rows, s + CHUNK_ROWS)
                np.matmul(kernels.im2col(x, k, s, e), wmat, out=y[s:e])
        y += b
        return y.reshape(n, h, w, self.out_ch), None

    def backward(self, params, x, y, cache, dy, need_dx):
        n, h, w, c = x.shape
        k = self.kernel
        f = self.out_ch
        wt = params[f"{self.name}.w"]
        rows = n * h * w
        dy2 = dy.reshape(rows, f)
        db = dy2.sum(axis=0)
        if k == 1:
            dw = x.reshape(rows, c).T @ dy2
            dx = (dy2 @ wt.reshape(c, f).T).reshape(n, h, w, c) if need_dx else None
            return dx, {f"{self.name}.w": dw.reshape(wt.shape), f"{self.name}.b": db}
        dw = np.zeros((k * k * c, f), dtype=x.dtype)
        dx = None
        if need_dx:
            # input gradient is a correlation of dy with the spatially flipped, transposed kernel
            wflip = np.ascontiguousarray(wt[::-1, ::-1].transpose(0, 1, 3, 2)).reshape(k * k * f, c)
            dyc = np.ascontiguousarray(dy)
            dx = np.empty((rows, c), dtype=x.dtype)
        for s in range(0, rows, CHUNK_ROWS):
            e = min(rows, s + CHUNK_ROWS)
            dw += kernels.im2col(x, k, s, e).T @ dy2[s:e]
            if need_dx:
                np.matmul(kernels.im2col(dyc, k, s, e), wflip, out=dx[s:e])
        if dx is not None:
            dx = dx.reshape(n, h, w, c)
        return dx, {f"{self.name}.w": dw.reshape(wt.shape), f"{self.name}.b": db}


@dataclass(frozen=True)
class Dense(Layer):
    in_dim: int
    out_dim: int

    kind: ClassVar[str] = "dense"

    def param_shapes(self):
        return {f"{self.name}.w": (self.in_dim, self.out_dim), f"{self.name}.b": (self.out_dim,)}

    def output_shape(self, in_shape):
        if in_shape != (self.in_dim,):
            raise ShapeMismatch(f"{self.name}: expects ({self.in_dim},), got {in_shape}")
        return (self.out_dim,)

    def forward(self, params, x, train, rng):
        return x @ params[f"{self.name}.w"] + params[f"{self.name}.b"], None

    def backward(self, params, x, y, cache, dy, need_dx):
        grads = {f"{self.name}.w": x.T @ dy, f"{self.name}.b": dy.sum(axis=0)}
        dx = dy @ params[f"{self.name}.w"].T if need_dx else None
        return dx, grads


@dataclass(frozen=True)
class ReLU(Layer):
    kind: ClassVar[str] = "relu"

    def forward(self, params, x, train, rng):
        return np.maximum(x, 0), None

    def backward(self, params, x, y, cache, dy, need_dx):
        return dy * (x > 0), {}


@dataclass(frozen=True)
class MaxPool(Layer):
    """2x2 max pooling, stride 2. Ties resolve to the first window element."""

    kind: ClassVar[str] = "maxpool"

    def output_shape(self, in_shape):
        h, w, c = _expect_map(self, in_shape)
        if h % 2 or w % 2:
            raise ShapeMismatch(f"{self.name}: odd spatial size {h}x{w}")
        return (h // 2, w // 2, c)

    def forward(self, params, x, train, rng):
        return kernels.maxpool2_forward(np.ascontiguousarray(x))

    def backward(self, params, x, y, cache, dy, need_dx):
        return kernels.maxpool2_backward(np.ascontiguousarray(dy), cache), {}


@dataclass(frozen=True)
class Upsample(Layer):
    """Nearest-neighbour x2 upsampling."""

    kind: ClassVar[str] = "upsample"

    def output_shape(self, in_shape):
        h, w, c = _expect_map(self, in_shape)
        return (2 * h, 2 * w, c)

    def forward(self, params, x, train, rng):
        return x.repeat(2, axis=1).repeat(2, axis=2), None

    def backward(self, params, x, y, cache, dy, need_dx):
        n, h, w, c = dy.shape
        return dy.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4)), {}


@dataclass(frozen=True)
class GlobalMaxPool(Layer):
    kind: ClassVar[str] = "global_maxpool"

    def output_shape(self, in_shape):
        h, w, c = _expect_map(self, in_shape)
        return (c,)

    def forward(self, params, x, train, rng):
        n, h, w, c = x.shape
        flat = x.reshape(n, h * w, c)
        idx = flat.argmax(axis=1)
        return np.take_along_axis(flat, idx[:, None, :], axis=1)[:, 0, :], idx

    def backward(self, params, x, y, cache, dy, need_dx):
        n, h, w, c = x.shape
        dx = np.zeros((n, h * w, c), dtype=dy.dtype)
        np.put_along_axis(dx, cache[:, None, :], dy[:, None, :], axis=1)
        return dx.reshape(n, h, w, c), {}


@dataclass(frozen=True)
class Dropout(Layer):
    """Inverted dropout: scaled at train time, identity at eval."""

    rate: float = 0.25

    kind: ClassVar[str] = "dropout"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.rate}")

    def forward(self, params, x, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("train-mode dropout needs an explicit generator")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        return x * mask, mask

    def backward(self, params, x, y, cache, dy, need_dx):
        return (dy if cache is None else dy * cache), {}


@dataclass(frozen=True)
class Softmax(Layer):
    kind: ClassVar[str] = "softmax"

    def forward(self, params, x, train, rng):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True), None

    def backward(self, params, x, y, cache, dy, need_dx):
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True)), {}


@dataclass(frozen=True)
class Sigmoid(Layer):
    kind: ClassVar[str] = "sigmoid"

    def forward(self, params, x, train, rng):
        # split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out, None

    def backward(self, params, x, y, cache, dy, need_dx):
        return dy * y * (1 - y), {}


LAYER_TYPES: dict[str, type[Layer]] = {
    cls.kind: cls
    for cls in (Conv2D, Dense, ReLU, MaxPool, Upsample, GlobalMaxPool, Dropout, Softmax, Sigmoid)
}


def layer_from_dict(d: dict[str, Any]) -> Layer:
    d = dict(d)
    cls = LAYER_TYPES[d.pop("type")]
    return cls(**d)
