"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import GlobalMaxPool, MaxPool, ReLU, Sigmoid, Softmax
from .losses import jaccard_loss, nll_loss
from .network import NetworkSpec, backward, forward, init_params

# Near-zero gradients from cancelling terms: the difference quotient carries ~1e-11 of round-off.
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0
    n_skipped: int = 0
    tol: float = 1e-4

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.n_checked > 0 and self.worst <= self.tol


def _kink_signature(spec: NetworkSpec, acts) -> list[np.ndarray]:
    """Discrete branch choices of every piecewise layer; a change means we crossed a kink."""
    sig = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, ReLU):
            sig.append(acts.outputs[i] > 0)
        elif isinstance(layer, (MaxPool, GlobalMaxPool)):
            sig.append(acts.caches[i])
    return sig


def _same(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _make_loss(spec: NetworkSpec, loss: str, batch: int, rng: np.random.Generator):
    out_shape = (batch,) + spec.output_shape
    if loss == "nll":
        if not isinstance(spec.layers[-1], Softmax):
            raise ValueError("nll check needs a softmax output")
        labels = rng.integers(0, out_shape[-1], size=batch)
        return lambda out: nll_loss(out, labels)
    if loss == "jaccard":
        if not isinstance(spec.layers[-1], Sigmoid):
            raise ValueError("jaccard check needs a sigmoid output")
        target = (rng.random(out_shape) < 0.5).astype(np.float64)
        return lambda out: jaccard_loss(out, target)
    proj = rng.standard_normal(out_shape)

    class _Lin:
        def __init__(self, out):
            self.value = float(np.sum(proj * out))
            self.grad = proj

    return _Lin


def grad_check(
    spec: NetworkSpec,
    tol: float = 1e-4,
    loss: str = "linear",
    batch: int = 2,
    seed: int = 0,
    max_coords: int = 25,
    check_input: bool = True,
) -> GradCheckReport:
    """Compare backprop gradients with central differences in float64.

    Step size is ``1e-5 * (1 + |w|)``. Coordinates whose perturbation flips a
    ReLU sign or a pooling argmax are skipped and counted in ``n_skipped``.
    Dropout layers run in eval mode. Errors are keyed by parameter name (and
    ``"input"``); relative error is ``|a - n| / max(|a|, |n|, REL_FLOOR)``.
    """
    rng = np.random.default_rng(seed)
    store = init_params(spec, rng, dtype=np.float64)
    params = store.params
    for k in params:
        if k.endswith(".b"):
            params[k] = rng.uniform(-0.1, 0.1, size=params[k].shape)
    x = rng.standard_normal((batch,) + spec.input_shape)
    loss_fn = _make_loss(spec, loss, batch, rng)

    acts = forward(spec, params, x)
    base_sig = _kink_signature(spec, acts)
    lv = loss_fn(acts.output)
    grads, dx = backward(spec, params, acts, lv.grad, return_input=True)

    report = GradCheckReport(tol=tol)

    def probe(arr: np.ndarray, analytic: np.ndarray, key: str, inp: np.ndarray | None = None):
        flat = arr.reshape(-1)
        n_coords = min(max_coords, flat.size)
        coords = rng.choice(flat.size, size=n_coords, replace=False)
        worst = report.max_rel_error.get(key, 0.0)
        for c in coords:
            orig = flat[c]
            h = 1e-5 * (1.0 + abs(orig))
            vals = []
            ok = True
            for sgn in (1.0, -1.0):
                flat[c] = orig + sgn * h
                a = forward(spec, params, x if inp is None else inp)
                if not _same(_kink_signature(spec, a), base_sig):
                    ok = False
                vals.append(loss_fn(a.output).value)
            flat[c] = orig
            if not ok:
                report.n_skipped += 1
                continue
            num = (vals[0] - vals[1]) / (2 * h)
            ana = float(analytic.reshape(-1)[c])
            rel = abs(ana - num) / max(abs(ana), abs(num), REL_FLOOR)
            worst = max(worst, rel)
            report.n_checked += 1
        report.max_rel_error[key] = worst

    for key in params:
        probe(params[key], grads[key], key)
    if check_input:
        xin = x.copy()
        probe(xin, dx, "input", inp=xin)
    return report
