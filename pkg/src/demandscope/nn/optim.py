from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from ..errors import NonFiniteGradient
from .network import ParameterStore


def adam_step(
    store: ParameterStore,
    grads: Mapping[str, np.ndarray],
    lr: float = 1e-5,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    frozen: Iterable[str] = (),
) -> ParameterStore:
    """One bias-corrected Adam update, applied in place. Returns ``store``."""
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {key}")
    b1, b2 = betas
    store.step += 1
    t = store.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    skip = set(frozen)
    for key, w in store.params.items():
        if key in skip or key not in grads:
            continue
        g = grads[key].astype(w.dtype, copy=False)
        m = store.m.get(key)
        if m is None:
            m = store.m[key] = np.zeros_like(w)
            store.v[key] = np.zeros_like(w)
        v = store.v[key]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        w -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(w.dtype)
    return store
