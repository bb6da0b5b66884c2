import numpy as np
import pytest

from demandscope.architectures import DEFAULT_ENCODER, EncoderConfig, build_encoder, build_segmenter
from demandscope.errors import EmptyMask, InvalidConfig, ShapeMismatch, ValidationError
from demandscope.nn import Conv2D, forward, init_params, param_count
from demandscope.nn.layers import MaxPool, Upsample
from demandscope.segmentation import (
    finetune_pointer,
    iou,
    point_channel,
    pointer_segment,
    segment,
    train_segmenter,
)
from demandscope.training import TrainConfig

TINY = EncoderConfig(stages=2, convs_per_stage=1, filters=8, patch_size=32)


# ------------------------------------------------------------------- IOU

def test_iou_cases():
    a = np.zeros((8, 8))
    a[:4] = 1
    assert iou(a, a) == 1.0
    b = np.zeros((8, 8))
    b[4:] = 1
    assert iou(a, b) == 0.0
    half = np.zeros((8, 8))
    half[:2] = 1
    assert iou(half, a) == 0.5
    assert iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0
    with pytest.raises(ShapeMismatch):
        iou(a, a[:4])


# -------------------------------------------------------------- networks

def test_default_encoder_shape_and_count():
    enc = build_encoder(DEFAULT_ENCODER)
    convs = [l for l in enc.layers if isinstance(l, Conv2D)]
    assert len(convs) == 20
    assert enc.output_shape == (4, 4, 64)
    assert param_count(enc) == 703_424 == 1_792 + 19 * 36_928
    assert abs(param_count(enc) - 728_000) / 728_000 <= 0.05


def test_single_stage_encoder():
    assert build_encoder(EncoderConfig(stages=1, convs_per_stage=1, filters=8)).output_shape == (64, 64, 8)


def test_encoder_config_validation():
    with pytest.raises(InvalidConfig):
        EncoderConfig(stages=0).validate()
    with pytest.raises(InvalidConfig):
        EncoderConfig(stages=8).validate()
    with pytest.raises(InvalidConfig):
        EncoderConfig(in_channels=2).validate()


def test_segmenter_is_a_plain_chain():
    spec = build_segmenter(build_encoder(DEFAULT_ENCODER))
    assert spec.output_shape == (128, 128, 1)
    shapes = spec.shapes()
    # each layer consumes exactly its predecessor's output: no skip edges
    for layer, s_in, s_out in zip(spec.layers, shapes, shapes[1:]):
        assert layer.output_shape(s_in) == s_out
    assert sum(isinstance(l, MaxPool) for l in spec.layers) == sum(isinstance(l, Upsample) for l in spec.layers) == 5


def test_segmenter_output_bounds():
    spec = build_segmenter(build_encoder(TINY))
    store = init_params(spec, np.random.default_rng(0))
    out = forward(spec, store, np.random.default_rng(1).standard_normal((3, 32, 32, 3)) * 10).output
    assert out.shape == (3, 32, 32, 1)
    assert out.min() >= 0 and out.max() <= 1


def test_point_channel():
    ch = point_channel(16, (4, 9))
    assert ch[4, 9] == 1.0 and ch.argmax() == 4 * 16 + 9
    with pytest.raises(ValidationError):
        point_channel(16, (16, 0))


# ------------------------------------------------------------- training

def _blocks(n, seed, size=32):
    rng = np.random.default_rng(seed)
    x = rng.integers(60, 120, (n, size, size, 3)).astype(np.uint8)
    y = np.zeros((n, size, size), np.uint8)
    for i in range(n):
        r, c = rng.integers(2, size - 12, 2)
        h, w = rng.integers(6, 11, 2)
        x[i, r:r + h, c:c + w] = 220
        y[i, r:r + h, c:c + w] = 1
    return x, y


def test_training_deterministic():
    x, y = _blocks(8, 0)
    cfg = TrainConfig(epochs=2, lr=1e-3, batch_size=4, seed=3)
    a = train_segmenter(x, y, x[:4], y[:4], cfg, TINY)
    b = train_segmenter(x, y, x[:4], y[:4], cfg, TINY)
    assert repr(a.history) == repr(b.history)
    for k in a.checkpoint.store.params:
        assert a.checkpoint.store.params[k].tobytes() == b.checkpoint.store.params[k].tobytes()


def test_training_learns_blocks():
    x, y = _blocks(48, 1)
    xv, yv = _blocks(16, 2)
    res = train_segmenter(x, y, xv, yv, TrainConfig(epochs=15, lr=3e-3, batch_size=8, seed=0), TINY)
    assert res.history[0]["val_iou"] < 0.5
    assert res.checkpoint.meta["val_iou"] >= 0.6
    assert res.checkpoint.meta["kind"] == "segmenter"


def test_points_required_for_both_sets():
    x, y = _blocks(4, 0)
    with pytest.raises(ValidationError):
        train_segmenter(x, y, x, y, TrainConfig(epochs=1), TINY, points=[(5, 5)] * 4)


# ------------------------------------------------------------ pointer

PALETTE_A = ((200, 204, 208), (40, 30, 20))
PALETTE_B = ((150, 60, 50), (230, 200, 90))


def _far_point(ma, mb, rng):
    """A pixel at least 6 px (chessboard) from both rectangles."""
    occupied = np.argwhere(ma | mb)
    while True:
        p = rng.integers(2, 30, 2)
        if np.abs(occupied - p).max(axis=1).min() >= 6:
            return int(p[0]), int(p[1])


def _two_rect_scenes(n, seed, palette=PALETTE_A, size=32, background_frac=0.0):
    """Two separated rectangles per scene; the point marks rectangle A.

    A ``background_frac`` share of scenes instead points at empty ground and has an empty target.
    """
    rng = np.random.default_rng(seed)
    x = np.empty((n, size, size, 3), np.uint8)
    ma = np.zeros((n, size, size), np.uint8)
    mb = np.zeros((n, size, size), np.uint8)
    pts = []
    for i in range(n):
        x[i] = rng.integers(70, 110, (size, size, 3))
        h1, w1, h2, w2 = rng.integers(5, 9, 4)
        top = rng.random() < 0.5
        r1 = int(rng.integers(1, 4)) if top else int(rng.integers(18, 32 - h1))
        r2 = int(rng.integers(18, 32 - h2)) if top else int(rng.integers(1, 4))
        c1, c2 = rng.integers(1, 32 - 9, 2)
        col1, col2 = (palette[k] for k in rng.permutation(2))
        x[i, r1:r1 + h1, c1:c1 + w1] = col1
        x[i, r2:r2 + h2, c2:c2 + w2] = col2
        ma[i, r1:r1 + h1, c1:c1 + w1] = 1
        mb[i, r2:r2 + h2, c2:c2 + w2] = 1
        if rng.random() < background_frac:
            pts.append(_far_point(ma[i], mb[i], rng))
            ma[i] = 0
        else:
            pts.append((r1 + h1 // 2, c1 + w1 // 2))
    return x, pts, ma, mb


POINTER_ENC = EncoderConfig(stages=2, convs_per_stage=2, filters=12, patch_size=32)


@pytest.fixture(scope="module")
def pointer():
    x, pts, ma, _ = _two_rect_scenes(192, 0, background_frac=0.2)
    xv, pv, mv, _ = _two_rect_scenes(32, 1)
    res = train_segmenter(x, ma, xv, mv, TrainConfig(epochs=25, lr=3e-3, batch_size=16, seed=0), POINTER_ENC,
                          points=pts, val_points=pv)
    assert res.checkpoint.meta["kind"] == "pointer"
    return res.checkpoint


def test_pointer_separates_instances(pointer):
    x, pts, ma, mb = _two_rect_scenes(24, 7)
    probs = segment(pointer, x, pts)
    ious_a = [iou(p, a) for p, a in zip(probs, ma)]
    ious_b = [iou(p, b) for p, b in zip(probs, mb)]
    assert np.mean(ious_a) >= 0.7
    assert np.mean(ious_b) <= 0.1


def test_pointer_conditioning_changes_mask(pointer):
    x, pts, ma, mb = _two_rect_scenes(1, 9)
    rb, cb = np.argwhere(mb[0]).mean(axis=0).astype(int)
    m1 = segment(pointer, x, [pts[0]])[0] >= 0.5
    m2 = segment(pointer, x, [(rb, cb)])[0] >= 0.5
    assert not np.array_equal(m1, m2)


def test_pointer_background_point_is_empty(pointer):
    x, pts, ma, mb = _two_rect_scenes(6, 11)
    rng = np.random.default_rng(0)
    empty = 0
    for i in range(6):
        try:
            pointer_segment(x[i], _far_point(ma[i], mb[i], rng), pointer)
        except EmptyMask:
            empty += 1
    assert empty >= 5


def test_pointer_segment_rejects_plain_segmenter():
    x, y = _blocks(4, 0)
    res = train_segmenter(x, y, x, y, TrainConfig(epochs=0), TINY)
    with pytest.raises(ShapeMismatch):
        pointer_segment(x[0], (5, 5), res.checkpoint)


def test_zero_epoch_finetune_is_identity(pointer):
    x, pts, ma, _ = _two_rect_scenes(8, 3)
    res = finetune_pointer(pointer, x, pts, ma, x, pts, ma, TrainConfig(epochs=0))
    for k, v in pointer.store.params.items():
        assert res.checkpoint.store.params[k].tobytes() == v.tobytes()


def test_finetune_recovers_from_domain_shift(pointer):
    x, pts, ma, _ = _two_rect_scenes(64, 20, PALETTE_B)
    xv, pv, mv, _ = _two_rect_scenes(32, 21, PALETTE_B)
    res = finetune_pointer(pointer, x, pts, ma, xv, pv, mv, TrainConfig(epochs=8, lr=2e-3, batch_size=16, seed=1))
    before = res.history[0]["val_iou"]
    assert res.checkpoint.meta["val_iou"] >= before + 0.05
