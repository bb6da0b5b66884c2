"""Sequential network specs, parameter storage, and forward/backward passes."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ..errors import ShapeMismatch
from .layers import Conv2D, Dense, Layer, layer_from_dict


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, ...]
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ShapeMismatch("layer names must be unique")
        self.shapes()

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-activation shapes: input first, then each layer's output."""
        out = [self.input_shape]
        for layer in self.layers:
            out.append(layer.output_shape(out[-1]))
        return out

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes()[-1]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    def index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"input_shape": list(self.input_shape), "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NetworkSpec":
        return cls(tuple(d["input_shape"]), tuple(layer_from_dict(l) for l in d["layers"]))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def __add__(self, other: "NetworkSpec") -> "NetworkSpec":
        if tuple(other.input_shape) != self.output_shape:
            raise ShapeMismatch(f"cannot chain {self.output_shape} into {other.input_shape}")
        return NetworkSpec(self.input_shape, self.layers + other.layers)


def param_count(spec: NetworkSpec) -> int:
    return sum(int(np.prod(s)) for s in spec.param_shapes().values())


@dataclass
class ParameterStore:
    """Weights plus Adam moment state."""

    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __getitem__(self, key: str) -> np.ndarray:
        return self.params[key]

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            {k: a.copy() for k, a in self.params.items()},
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
            self.step,
        )

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype


def init_params(
    spec: NetworkSpec,
    rng: np.random.Generator,
    dtype=np.float32,
    only: Iterable[str] | None = None,
) -> ParameterStore:
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases.

    Parameters are drawn in declaration order, so a given generator state always
    yields the same store.
    """
    wanted = None if only is None else set(only)
    params: dict[str, np.ndarray] = {}
    for layer in spec.layers:
        for key, shape in layer.param_shapes().items():
            if wanted is not None and layer.name not in wanted:
                continue
            if key.endswith(".b"):
                params[key] = np.zeros(shape, dtype=dtype)
                continue
            if isinstance(layer, Conv2D):
                fan_in = layer.kernel * layer.kernel * layer.in_ch
            elif isinstance(layer, Dense):
                fan_in = layer.in_dim
            else:  # pragma: no cover - only conv and dense carry weights
                fan_in = int(np.prod(shape[:-1]))
            bound = np.sqrt(6.0 / fan_in)
            params[key] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ParameterStore(params)


@dataclass
class Activations:
    """``outputs[0]`` is the input batch; ``outputs[i + 1]`` is layer ``i``'s output."""

    outputs: list[np.ndarray]
    caches: list[object]
    train: bool

    @property
    def output(self) -> np.ndarray:
        return self.outputs[-1]


def _as_params(params) -> Mapping[str, np.ndarray]:
    return params.params if isinstance(params, ParameterStore) else params


def forward(
    spec: NetworkSpec,
    params,
    batch: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    stop: int | None = None,
) -> Activations:
    """Run layers ``0 .. stop-1`` (all by default) and keep every activation."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    p = _as_params(params)
    x = np.asarray(batch)
    if tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeMismatch(f"batch shape {x.shape[1:]} does not match spec input {spec.input_shape}")
    dtype = next(iter(p.values())).dtype if p else x.dtype
    x = np.ascontiguousarray(x, dtype=dtype)
    train = mode == "train"
    outputs, caches = [x], []
    for layer in spec.layers[:stop]:
        x, cache = layer.forward(p, x, train, rng)
        outputs.append(x)
        caches.append(cache)
    return Activations(outputs, caches, train)


def backward(
    spec: NetworkSpec,
    params,
    acts: Activations,
    loss_grad: np.ndarray,
    start: int | None = None,
    stop: int = 0,
    return_input: bool = False,
):
    """Backpropagate ``loss_grad`` given w.r.t. ``acts.outputs[start]``.

    ``start`` defaults to the last activation. Propagation ends at
    ``acts.outputs[stop]``; with ``return_input`` the gradient w.r.t. that
    activation is returned alongside the parameter gradients.
    """
    p = _as_params(params)
    if start is None:
        start = len(acts.outputs) - 1
    grads: dict[str, np.ndarray] = {}
    dy = np.asarray(loss_grad, dtype=acts.outputs[start].dtype)
    for i in range(start - 1, stop - 1, -1):
        layer = spec.layers[i]
        need_dx = return_input or i > stop
        dx, g = layer.backward(p, acts.outputs[i], acts.outputs[i + 1], acts.caches[i], dy, need_dx)
        grads.update(g)
        dy = dx
    for key in p:
        if key not in grads:
            grads[key] = np.zeros_like(p[key])
    if return_input:
        return grads, dy
    return grads
