import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demandscope.errors import ClampWarning, NonFiniteGradient, ShapeMismatch
from demandscope.nn import (
    Checkpoint,
    Conv2D,
    Dense,
    Dropout,
    GlobalMaxPool,
    MaxPool,
    NetworkSpec,
    ParameterStore,
    ReLU,
    Sigmoid,
    Softmax,
    Upsample,
    adam_step,
    backward,
    forward,
    grad_check,
    init_params,
    jaccard_loss,
    load_checkpoint,
    nll_loss,
    param_count,
    save_checkpoint,
)
from demandscope.nn import _pykernels, kernels


# ---------------------------------------------------------------- losses

def test_nll_fixtures():
    assert nll_loss(np.array([[0.0, 1.0]]), np.array([1])).value == pytest.approx(0.0, abs=1e-12)
    assert nll_loss(np.array([[0.5, 0.5]]), np.array([0])).value == pytest.approx(0.693147, abs=1e-6)
    probs = np.array([[0.5, 0.5], [0.75, 0.25]])
    assert nll_loss(probs, np.array([1, 1])).value == pytest.approx(2.079442, abs=1e-6)


def test_nll_mean_reduction_and_clamp():
    probs = np.array([[0.5, 0.5], [0.75, 0.25]])
    assert nll_loss(probs, np.array([1, 1]), "mean").value == pytest.approx(2.079442 / 2, abs=1e-6)
    with pytest.warns(ClampWarning):
        lv = nll_loss(np.array([[1.0, 0.0]]), np.array([1]))
    assert math.isfinite(lv.value)


def test_jaccard_fixtures():
    t = np.array([1.0, 0.0, 1.0, 1.0])
    assert jaccard_loss(t, t).value == pytest.approx(0.0, abs=1e-12)
    n = 50
    lv = jaccard_loss(np.zeros(n), np.ones(n))
    assert lv.value == pytest.approx(1 - 1e-6 / (n + 1e-6), abs=1e-12)
    assert jaccard_loss(np.array([0.5, 0.5]), np.array([1.0, 0.0])).value == pytest.approx(0.666666, abs=1e-5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_losses_non_negative(ps, seed):
    p = np.array(ps)
    t = (np.random.default_rng(seed).random(len(p)) < 0.5).astype(float)
    assert jaccard_loss(p, t).value >= -1e-12
    probs = np.stack([1 - p, p], axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        assert nll_loss(probs, t.astype(int)).value >= 0


def test_jaccard_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    p = rng.random(12)
    t = (rng.random(12) < 0.5).astype(float)
    g = jaccard_loss(p, t).grad
    h = 1e-6
    for i in range(12):
        e = np.zeros(12)
        e[i] = h
        num = (jaccard_loss(p + e, t).value - jaccard_loss(p - e, t).value) / (2 * h)
        assert g[i] == pytest.approx(num, rel=1e-6, abs=1e-9)


# ---------------------------------------------------------- layers and nets

def _rng(seed=0):
    return np.random.default_rng(seed)


def test_identity_dense_is_identity():
    spec = NetworkSpec((4,), (Dense("d", 4, 4),))
    params = {"d.w": np.eye(4), "d.b": np.zeros(4)}
    v = np.array([[1.0, -2.0, 3.5, 0.0]])
    np.testing.assert_array_equal(forward(spec, params, v).output, v)


def test_softmax_rows_sum_to_one():
    spec = NetworkSpec((5,), (Dense("d", 5, 3), Softmax("sm")))
    store = init_params(spec, _rng())
    out = forward(spec, store, _rng(1).standard_normal((10, 5)) * 20).output
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)


def test_eval_mode_deterministic():
    spec = NetworkSpec((8, 8, 3), (Conv2D("c", 3, 4), ReLU("r"), Dropout("d", 0.5), MaxPool("p"), GlobalMaxPool("g")))
    store = init_params(spec, _rng())
    x = _rng(2).standard_normal((2, 8, 8, 3))
    a = forward(spec, store, x).output
    b = forward(spec, store, x).output
    assert a.tobytes() == b.tobytes()


def test_dropout_rate_bounds():
    with pytest.raises(ValueError):
        Dropout("d", 1.0)
    with pytest.raises(ValueError):
        Dropout("d", -0.1)


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        NetworkSpec((4,), (Dense("a", 4, 3), Dense("b", 4, 2)))
    spec = NetworkSpec((4,), (Dense("a", 4, 3),))
    with pytest.raises(ShapeMismatch):
        forward(spec, init_params(spec, _rng()), np.zeros((1, 5)))


def test_param_counts():
    assert param_count(NetworkSpec((8, 8, 3), (Conv2D("c", 3, 64),))) == 1792
    assert param_count(NetworkSpec((8, 8, 64), (Conv2D("c", 64, 64),))) == 36928


def test_zero_loss_gradient_gives_zero_param_gradients():
    spec = NetworkSpec((6, 6, 2), (Conv2D("c", 2, 3), ReLU("r"), GlobalMaxPool("g"), Dense("d", 3, 2)))
    store = init_params(spec, _rng(), dtype=np.float64)
    acts = forward(spec, store, _rng(1).standard_normal((2, 6, 6, 2)))
    grads = backward(spec, store, acts, np.zeros((2, 2)))
    assert all(not g.any() for g in grads.values())


def test_single_dense_gradient_is_outer_product():
    spec = NetworkSpec((3,), (Dense("d", 3, 2),))
    store = init_params(spec, _rng(), dtype=np.float64)
    x = _rng(1).standard_normal((4, 3))
    delta = _rng(2).standard_normal((4, 2))
    grads = backward(spec, store, forward(spec, store, x), delta)
    np.testing.assert_allclose(grads["d.w"], x.T @ delta, rtol=1e-12)
    np.testing.assert_allclose(grads["d.b"], delta.sum(axis=0), rtol=1e-12)


@pytest.mark.parametrize(
    "layers,shape,loss",
    [
        ((Conv2D("c", 1, 1),), (5, 5, 1), "linear"),
        ((Conv2D("c", 2, 3), ReLU("r")), (6, 6, 2), "linear"),
        ((Conv2D("c", 2, 2), MaxPool("p")), (6, 6, 2), "linear"),
        ((Conv2D("c", 2, 2), Upsample("u")), (4, 4, 2), "linear"),
        ((Conv2D("c", 2, 3), GlobalMaxPool("g"), Dense("d", 3, 2), Softmax("s")), (6, 6, 2), "nll"),
        ((Dense("d", 5, 4), Dropout("x", 0.5), Dense("e", 4, 3), Softmax("s")), (5,), "nll"),
        ((Conv2D("c", 2, 1), Sigmoid("s")), (6, 6, 2), "jaccard"),
    ],
)
def test_gradients_match_finite_differences(layers, shape, loss):
    spec = NetworkSpec(shape, layers)
    rep = grad_check(spec, tol=1e-4, loss=loss, seed=1)
    assert rep.passed, rep.max_rel_error


def test_small_conv_gradient_tight_tolerance():
    rep = grad_check(NetworkSpec((5, 5, 1), (Conv2D("c", 1, 1),)), tol=1e-6, seed=4)
    assert rep.passed, rep.max_rel_error


# ------------------------------------------------------------------ Adam

def test_adam_zero_gradient_leaves_params():
    store = ParameterStore({"w": np.array([1.0, -2.0])})
    adam_step(store, {"w": np.zeros(2)}, lr=1e-3)
    np.testing.assert_array_equal(store.params["w"], [1.0, -2.0])


def test_adam_first_step_size():
    store = ParameterStore({"w": np.array([0.0])})
    adam_step(store, {"w": np.array([1.0])}, lr=1e-5)
    assert store.params["w"][0] == pytest.approx(-1e-5, rel=1e-6)


def test_adam_rejects_non_finite():
    store = ParameterStore({"w": np.array([0.0])})
    with pytest.raises(NonFiniteGradient):
        adam_step(store, {"w": np.array([np.nan])})


def test_adam_trajectories_deterministic():
    def run():
        spec = NetworkSpec((3,), (Dense("d", 3, 2), Softmax("s")))
        store = init_params(spec, _rng(5))
        x = _rng(6).standard_normal((8, 3)).astype(np.float32)
        y = np.arange(8) % 2
        for _ in range(5):
            acts = forward(spec, store, x)
            adam_step(store, backward(spec, store, acts, nll_loss(acts.output, y).grad), lr=1e-2)
        return store.params["d.w"].tobytes()

    assert run() == run()


# ------------------------------------------------------- checkpoint, kernels

def test_checkpoint_round_trip(tmp_path):
    spec = NetworkSpec((4, 4, 3), (Conv2D("c", 3, 2), ReLU("r"), GlobalMaxPool("g"), Dense("d", 2, 2), Softmax("s")))
    store = init_params(spec, _rng())
    adam_step(store, {k: np.ones_like(v) for k, v in store.params.items()})
    save_checkpoint(tmp_path / "m.ckpt", Checkpoint(spec, store, {"kind": "classifier", "x": [1, 2]}))
    ck = load_checkpoint(tmp_path / "m.ckpt")
    assert ck.spec == spec and ck.meta["x"] == [1, 2] and ck.store.step == 1
    for k in store.params:
        assert ck.store.params[k].tobytes() == store.params[k].tobytes()


@given(st.integers(1, 3), st.integers(1, 5), st.sampled_from([1, 3]), st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_kernels_match_reference(n, c, k, seed):
    x = np.random.default_rng(seed).standard_normal((n, 6, 8, c)).astype(np.float32)
    assert kernels.im2col(x, k).tobytes() == _pykernels.im2col(x, k).tobytes()
    total = n * 48
    a, b = sorted(np.random.default_rng(seed + 1).integers(0, total, 2))
    assert kernels.im2col(x, k, a, b + 1).tobytes() == _pykernels.im2col(x, k, a, b + 1).tobytes()
    out, idx = kernels.maxpool2_forward(x)
    rout, ridx = _pykernels.maxpool2_forward(x)
    assert out.tobytes() == rout.tobytes() and idx.tobytes() == ridx.tobytes()
    assert kernels.maxpool2_backward(out, idx).tobytes() == _pykernels.maxpool2_backward(rout, ridx).tobytes()
