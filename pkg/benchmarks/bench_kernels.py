"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel on shapes seen during training, then one forward/backward
step of the quick classifier with each backend swapped in.
"""
import argparse
import time

import numpy as np

from demandscope.architectures import QUICK_ENCODER, build_classifier
from demandscope.nn import backward, forward, init_params, kernels, nll_loss


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def use(backend):
    for name in ("im2col", "maxpool2_forward", "maxpool2_backward"):
        setattr(kernels, name, getattr(backend, name))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["compiled"] = kernels.compiled_backend
    else:
        print("compiled extension not available; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    x = rng.standard_normal((16, 64, 64, 16)).astype(np.float32)
    out, idx = kernels.python_backend.maxpool2_forward(x)
    cases = {
        "im2col 16x64x64x16 k3": lambda b: b.im2col(x, 3),
        "maxpool2 forward": lambda b: b.maxpool2_forward(x),
        "maxpool2 backward": lambda b: b.maxpool2_backward(out, idx),
    }
    print(f"{'case':<28}" + "".join(f"{n:>12}" for n in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        t = {n: best_of(lambda: fn(b), args.repeat) for n, b in backends.items()}
        row = f"{name:<28}" + "".join(f"{v * 1e3:>10.2f}ms" for v in t.values())
        if len(t) == 2:
            row += f"{t['python'] / t['compiled']:>9.1f}x"
        print(row)

    spec = build_classifier(QUICK_ENCODER)
    store = init_params(spec, rng)
    imgs = rng.random((32, *spec.input_shape)).astype(np.float32)
    y = np.arange(32) % 2

    def step():
        acts = forward(spec, store, imgs, "train", np.random.default_rng(1))
        backward(spec, store, acts, nll_loss(acts.output, y).grad)

    t = {}
    for n, b in backends.items():
        use(b)
        t[n] = best_of(step, max(1, args.repeat // 2))
    use(kernels.active)
    row = f"{'classifier step (batch 32)':<28}" + "".join(f"{v * 1e3:>10.1f}ms" for v in t.values())
    if len(t) == 2:
        row += f"{t['python'] / t['compiled']:>9.1f}x"
    print(row)


if __name__ == "__main__":
    main()
