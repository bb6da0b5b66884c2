import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demandscope.architectures import EncoderConfig, build_classifier
from demandscope.classifier import (
    build_fusion,
    fusion_backward,
    fusion_forward,
    fusion_init,
    init_from_segmentation,
    low_data_curve,
    predict,
    predict_fusion,
    train_classifier,
    train_fusion,
    write_classifier_history,
    write_predictions,
)
from demandscope.errors import InvalidConfig, ShapeMismatch, ValidationError
from demandscope.nn import Softmax, adam_step, backward, forward, init_params, nll_loss
from demandscope.segmentation import train_segmenter
from demandscope.training import TrainConfig

TINY = EncoderConfig(stages=2, convs_per_stage=1, filters=8, patch_size=32)


def roofs(n, seed, size=32):
    """Toy tiers: High scenes hold a large bright roof, Low scenes a small dark one."""
    rng = np.random.default_rng(seed)
    x = rng.integers(70, 110, (n, size, size, 3)).astype(np.uint8)
    y = np.arange(n) % 2
    for i in range(n):
        if y[i]:
            h, w, col = *rng.integers(10, 15, 2), rng.integers(190, 230)
        else:
            h, w, col = *rng.integers(4, 7, 2), rng.integers(20, 50)
        r, c = rng.integers(1, size - h), rng.integers(1, size - w)
        x[i, r:r + h, c:c + w] = col
    return x, y


@pytest.fixture(scope="module")
def seg_ckpt():
    x, _ = roofs(8, 0)
    m = (x[..., 0] > 150).astype(np.uint8)
    return train_segmenter(x, m, x, m, TrainConfig(epochs=1, lr=1e-3, batch_size=4), TINY).checkpoint


def test_seg_init_copies_encoder(seg_ckpt):
    spec = build_classifier(TINY)
    a = init_from_segmentation(spec, seg_ckpt, np.random.default_rng(0))
    b = init_from_segmentation(spec, seg_ckpt, np.random.default_rng(1))
    for k, v in seg_ckpt.store.params.items():
        if k.startswith("enc."):
            assert a.params[k].tobytes() == v.tobytes()
    assert not np.array_equal(a.params["head.dense.w"], b.params["head.dense.w"])


def test_seg_init_shape_mismatch(seg_ckpt):
    spec = build_classifier(EncoderConfig(stages=2, convs_per_stage=1, filters=4, patch_size=32))
    with pytest.raises(ShapeMismatch):
        init_from_segmentation(spec, seg_ckpt, np.random.default_rng(0))


def test_random_init_ignores_checkpoint(seg_ckpt):
    x, y = roofs(16, 1)
    cfg = TrainConfig(epochs=1, lr=1e-3, batch_size=8)
    a = train_classifier(x, y, x, y, cfg, TINY, "random", seg_ckpt)
    b = train_classifier(x, y, x, y, cfg, TINY, "random", None)
    for k in a.checkpoint.store.params:
        assert a.checkpoint.store.params[k].tobytes() == b.checkpoint.store.params[k].tobytes()


def test_bad_init_arguments():
    x, y = roofs(4, 0)
    with pytest.raises(InvalidConfig):
        train_classifier(x, y, x, y, TrainConfig(epochs=0), TINY, "imagenet")
    with pytest.raises(ValidationError):
        train_classifier(x, y, x, y, TrainConfig(epochs=0), TINY, "seg", None)


def test_one_batch_overfit():
    x, y = roofs(8, 2)
    x = x.astype(np.float32) / 255
    spec = build_classifier(TINY, dropout=0.0)
    store = init_params(spec, np.random.default_rng(0))
    for _ in range(500):
        acts = forward(spec, store, x, "train", None)
        loss = nll_loss(acts.output, y, "mean")
        if loss.value < 0.01:
            break
        adam_step(store, backward(spec, store, acts, nll_loss(acts.output, y).grad), lr=1e-3)
    assert loss.value < 0.01


@pytest.fixture(scope="module")
def trained():
    x, y = roofs(160, 3)
    xv, yv = roofs(40, 4)
    return train_classifier(x, y, xv, yv, TrainConfig(epochs=12, lr=2e-3, batch_size=16, seed=1), TINY)


def test_predictions_are_distributions(trained):
    x, _ = roofs(10, 5)
    p = predict(trained.checkpoint, x)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    assert predict(trained.checkpoint, x).tobytes() == p.tobytes()


def test_learns_large_bright_roofs(trained):
    x, y = roofs(60, 6)
    pred = predict(trained.checkpoint, x).argmax(axis=1)
    assert np.mean(pred[y == 1] == 1) >= 0.9


def test_history_and_prediction_files(trained, tmp_path):
    write_classifier_history(tmp_path / "h.csv", trained.history)
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "epoch,split,loss,f1,auc" and len(rows) == 1 + 1 + 2 * 12
    write_predictions(tmp_path / "p.csv", ["a", "b"], np.array([[0.7, 0.3], [0.2, 0.8]]))
    assert (tmp_path / "p.csv").read_text().splitlines()[1:] == ["a,0.700000,0.300000,Low", "b,0.200000,0.800000,High"]


def test_full_fraction_matches_direct_training(seg_ckpt):
    x, y = roofs(24, 7)
    xv, yv = roofs(8, 8)
    cfg = TrainConfig(epochs=2, lr=1e-3, batch_size=8, seed=2)
    pts = low_data_curve(x, y, xv, yv, xv, yv, cfg, fractions=[1.0], seg_checkpoint=seg_ckpt, encoder=TINY)
    for pt in pts:
        direct = train_classifier(x, y, xv, yv, cfg, TINY, pt.init, seg_ckpt)
        assert pt.val_f1 == direct.checkpoint.meta["val_f1"]
        assert pt.n_train == 24


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), st.floats(0.1, 5), st.floats(-3, 3))
def test_argmax_invariant_to_monotone_rescaling(z, a, b):
    z = np.array([z])
    soft = Softmax("s")
    p1, _ = soft.forward({}, z, False, None)
    p2, _ = soft.forward({}, np.tanh(z / 40) * a + b, False, None)
    if abs(z[0, 0] - z[0, 1]) > 1e-6:
        assert p1.argmax() == p2.argmax()


# ------------------------------------------------------------------ fusion

def test_fusion_shapes():
    fspec = build_fusion(TINY, 18)
    assert fspec.feature_dims == (8, 16)
    store = fusion_init(fspec, np.random.default_rng(0))
    x, _ = roofs(3, 0)
    probs, _ = fusion_forward(fspec, store, x.astype(np.float32) / 255, np.zeros((3, 18), np.float32))
    assert probs.shape == (3, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-6)


def test_default_fusion_width():
    fspec = build_fusion(EncoderConfig(), 18)
    assert sum(fspec.feature_dims) == 80


def test_zero_tabular_branch_is_image_only():
    fspec = build_fusion(TINY, 18)
    store = fusion_init(fspec, np.random.default_rng(0))
    for k in store.params:
        if k.startswith("mlp."):
            store.params[k][...] = 0
    x, _ = roofs(4, 1)
    xi = x.astype(np.float32) / 255
    rng = np.random.default_rng(2)
    a, _ = fusion_forward(fspec, store, xi, rng.standard_normal((4, 18)).astype(np.float32))
    b, _ = fusion_forward(fspec, store, xi, rng.standard_normal((4, 18)).astype(np.float32) * 10)
    assert a.tobytes() == b.tobytes()


def test_fusion_gradients_match_finite_differences():
    enc = EncoderConfig(stages=1, convs_per_stage=1, filters=3, patch_size=4)
    fspec = build_fusion(enc, 5)
    rng = np.random.default_rng(0)
    store = fusion_init(fspec, rng)
    params = {k: v.astype(np.float64) for k, v in store.params.items()}
    for k in params:
        if k.endswith(".b"):
            params[k] = rng.uniform(-0.1, 0.1, params[k].shape)
    xi = rng.standard_normal((3, 4, 4, 3))
    xt = rng.standard_normal((3, 5))
    y = np.array([0, 1, 1])

    def loss():
        return nll_loss(fusion_forward(fspec, params, xi, xt)[0], y).value

    probs, state = fusion_forward(fspec, params, xi, xt)
    grads = fusion_backward(fspec, params, state, nll_loss(probs, y).grad)
    checked = 0
    for key in ("enc.s0.conv0.w", "mlp.dense0.w", "mlp.dense2.b", "fuse.dense.w"):
        flat = params[key].reshape(-1)
        for c in range(min(6, flat.size)):
            orig = flat[c]
            h = 1e-5 * (1 + abs(orig))
            flat[c] = orig + h
            up = loss()
            flat[c] = orig - h
            down = loss()
            flat[c] = orig
            num = (up - down) / (2 * h)
            ana = grads[key].reshape(-1)[c]
            if max(abs(num), abs(ana)) > 1e-7:
                assert abs(num - ana) / max(abs(num), abs(ana)) <= 1e-4, key
                checked += 1
    assert checked >= 8


def test_train_and_predict_fusion():
    x, y = roofs(32, 9)
    tab = np.column_stack([y + np.random.default_rng(0).normal(0, 0.1, 32), np.ones(32)])
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = train_fusion(x, tab, y, x, tab, y, TrainConfig(epochs=3, lr=2e-3, batch_size=8), TINY)
    assert res.checkpoint.spec is None and res.checkpoint.meta["kind"] == "fusion"
    probs = predict_fusion(res.checkpoint, x, tab)
    assert probs.shape == (32, 2)
    with pytest.raises(ValidationError):
        predict(res.checkpoint, x)
