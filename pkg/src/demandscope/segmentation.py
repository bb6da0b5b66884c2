"""Building segmentation pretraining and point-conditioned footprint extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .architectures import QUICK_ENCODER, EncoderConfig, build_encoder, build_segmenter
from .errors import EmptyMask, ShapeMismatch, ValidationError
from .nn import Checkpoint, NetworkSpec, adam_step, backward, forward, init_params, jaccard_loss
from .pipeline.dataset import Standardizer, augment, fit_image_stats, normalize
from .training import TrainConfig, fit

POINT_SIGMA = 2.0
EVAL_BATCH = 64
HISTORY_FIELDS = ["epoch", "train_loss", "val_loss", "val_iou"]


def iou(pred: np.ndarray, true: np.ndarray, threshold: float = 0.5) -> float:
    """Intersection over union after binarizing ``pred``; 1.0 when both masks are empty."""
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.shape != true.shape:
        raise ShapeMismatch(f"mask shapes differ: {pred.shape} vs {true.shape}")
    p = pred >= threshold
    t = true >= threshold
    union = np.count_nonzero(p | t)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & t) / union


def point_channel(size: int, point: tuple[int, int], sigma: float = POINT_SIGMA) -> np.ndarray:
    """Gaussian bump with peak 1 at ``point`` = (row, col)."""
    r, c = point
    if not (0 <= r < size and 0 <= c < size):
        raise ValidationError(f"point {point} outside a {size}x{size} patch")
    yy, xx = np.mgrid[0:size, 0:size]
    return np.exp(-((yy - r) ** 2 + (xx - c) ** 2) / (2.0 * sigma * sigma))


def model_inputs(images: np.ndarray, stats: Standardizer, points=None) -> np.ndarray:
    """Normalized NHWC float32 batch; appends the point channel when ``points`` is given."""
    x = normalize(images, stats)
    if points is None:
        return x
    size = x.shape[1]
    chans = np.stack([point_channel(size, tuple(p)) for p in points]).astype(np.float32)
    return np.concatenate([x, chans[..., None]], axis=-1)


def predict_masks(spec: NetworkSpec, params, x: np.ndarray, batch: int = EVAL_BATCH) -> np.ndarray:
    out = [forward(spec, params, x[i:i + batch]).output[..., 0] for i in range(0, len(x), batch)]
    return np.concatenate(out) if out else np.zeros(x.shape[:3], dtype=np.float32)


def pooled_iou(probs: np.ndarray, masks: np.ndarray, threshold: float = 0.5) -> float:
    """IOU over all pixels of a set of patches at once."""
    return iou(probs, masks.astype(probs.dtype), threshold)


def _augment_batch(x: np.ndarray, y: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = np.empty_like(x), np.empty_like(y)
    for i in range(len(x)):
        a, m = augment(x[i], rng, y[i])
        xs[i] = a
        ys[i] = (m >= 0.5).astype(y.dtype)
    return xs, ys


@dataclass
class SegmentationResult:
    checkpoint: Checkpoint
    history: list[dict]


def train_segmenter(
    images: np.ndarray,
    masks: np.ndarray,
    val_images: np.ndarray,
    val_masks: np.ndarray,
    config: TrainConfig,
    encoder: EncoderConfig = QUICK_ENCODER,
    points=None,
    val_points=None,
    init: Checkpoint | None = None,
    stop_at: float | None = None,
) -> SegmentationResult:
    """Minimize the Jaccard loss; keep the epoch with the best pooled validation IOU.

    ``images`` are uint8 patches. With ``points`` the network gets a fourth
    input channel marking one building, and ``masks`` should hold that
    building only. ``init`` continues from an existing checkpoint (and reuses
    its normalization statistics).
    """
    pointer = points is not None
    if pointer != (val_points is not None):
        raise ValidationError("points must be given for both train and validation sets, or neither")
    if len(images) != len(masks) or len(val_images) != len(val_masks):
        raise ShapeMismatch("image and mask counts differ")
    if init is not None:
        spec = init.spec
        store = init.store.copy()
        stats = Standardizer.from_dict(init.meta["image_stats"])
        enc_cfg = init.meta["encoder"]
    else:
        enc_cfg = EncoderConfig(**{**encoder.to_dict(), "in_channels": 4 if pointer else 3})
        spec = build_segmenter(build_encoder(enc_cfg))
        rng0 = np.random.default_rng(np.random.SeedSequence([config.seed, 11]))
        store = init_params(spec, rng0)
        stats = fit_image_stats(images)
        enc_cfg = enc_cfg.to_dict()
    if spec.input_shape[-1] != (4 if pointer else 3):
        raise ShapeMismatch("checkpoint input channels do not match the point conditioning")

    x = model_inputs(images, stats, points)
    y = masks.astype(np.float32)
    xv = model_inputs(val_images, stats, val_points)
    yv = val_masks.astype(np.float32)

    def step(idx, rng):
        xb, yb = x[idx], y[idx]
        if config.augment:
            xb, yb = _augment_batch(xb, yb, rng)
        acts = forward(spec, store, xb, "train", rng)
        loss = jaccard_loss(acts.output[..., 0], yb)
        grads = backward(spec, store, acts, loss.grad[..., None])
        adam_step(store, grads, lr=config.lr)
        return loss.value * len(idx)

    def validate():
        probs = predict_masks(spec, store, xv)
        val_loss = jaccard_loss(probs, yv).value if len(xv) else float("nan")
        score = pooled_iou(probs, yv) if len(xv) else 0.0
        return score, {"val_loss": float(val_loss), "val_iou": float(score)}

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 12]))
    res = fit(store, len(x), config, step, validate, rng, stop_at)
    meta = {
        "kind": "pointer" if pointer else "segmenter",
        "encoder": enc_cfg,
        "image_stats": stats.to_dict(),
        "train": config.to_dict(),
        "best_epoch": res.best_epoch,
        "val_iou": res.best_score,
    }
    return SegmentationResult(Checkpoint(spec, res.store, meta), res.history)


def segment(checkpoint: Checkpoint, images: np.ndarray, points=None) -> np.ndarray:
    """Mask probabilities for uint8 patches."""
    stats = Standardizer.from_dict(checkpoint.meta["image_stats"])
    return predict_masks(checkpoint.spec, checkpoint.store, model_inputs(images, stats, points))


def pointer_segment(patch: np.ndarray, point: tuple[int, int], checkpoint: Checkpoint, threshold: float = 0.5) -> np.ndarray:
    """Binary mask of the building marked by ``point``; raises EmptyMask when nothing is found."""
    if checkpoint.spec.input_shape[-1] != 4:
        raise ShapeMismatch("pointer segmentation needs a 4-channel checkpoint")
    prob = segment(checkpoint, patch[None], [point])[0]
    mask = prob >= threshold
    if not mask.any():
        raise EmptyMask(f"no pixel above {threshold} for point {point}")
    return mask.astype(np.uint8)


def finetune_pointer(
    checkpoint: Checkpoint,
    images: np.ndarray,
    points,
    masks: np.ndarray,
    val_images: np.ndarray,
    val_points,
    val_masks: np.ndarray,
    config: TrainConfig,
) -> SegmentationResult:
    """Continue training a pointer checkpoint on a small target-domain set.

    The starting state is epoch 0 of the validation history, so the returned
    checkpoint never scores below it on the validation set.
    """
    if checkpoint.meta.get("kind") != "pointer":
        raise ValidationError("finetune_pointer expects a pointer checkpoint")
    res = train_segmenter(images, masks, val_images, val_masks, config, points=points,
                          val_points=val_points, init=checkpoint)
    res.checkpoint.meta["finetuned_from_val_iou"] = res.history[0]["val_iou"]
    return res


def encoder_params(checkpoint: Checkpoint) -> dict[str, np.ndarray]:
    return {k: v for k, v in checkpoint.store.params.items() if k.startswith("enc.")}
