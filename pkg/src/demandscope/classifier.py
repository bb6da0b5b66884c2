"""Consumption-tier classifiers: transfer from segmentation, low-data curves, image + tabular fusion."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .architectures import (
    MLP_HIDDEN,
    QUICK_ENCODER,
    EncoderConfig,
    build_classifier,
    build_encoder,
    build_mlp_trunk,
)
from .errors import InvalidConfig, ShapeMismatch, ValidationError
from .evaluation import evaluate, macro_f1
from .nn import (
    Checkpoint,
    Dense,
    Dropout,
    GlobalMaxPool,
    NetworkSpec,
    ParameterStore,
    Softmax,
    adam_step,
    backward,
    forward,
    init_params,
    nll_loss,
)
from .pipeline.dataset import Standardizer, augment, fit_image_stats, fit_standardizer, nested_indices, normalize
from .training import TrainConfig, fit

EVAL_BATCH = 128
INITS = ("random", "seg")
LOW_DATA_FRACTIONS = (0.05, 0.2, 0.4, 0.6, 0.8, 1.0)


def predict_probs(spec: NetworkSpec, params, x: np.ndarray, batch: int = EVAL_BATCH) -> np.ndarray:
    """Eval-mode class probabilities, (N, 2)."""
    out = [forward(spec, params, x[i:i + batch]).output for i in range(0, len(x), batch)]
    return np.concatenate(out).astype(np.float64) if out else np.zeros((0, 2))


def _augment_images(xb: np.ndarray, rng) -> np.ndarray:
    out = np.empty_like(xb)
    for i in range(len(xb)):
        out[i] = augment(xb[i], rng)
    return out


@dataclass
class ClassifierResult:
    checkpoint: Checkpoint
    history: list[dict]


def train_network(
    spec: NetworkSpec,
    store: ParameterStore,
    x: np.ndarray,
    y: np.ndarray,
    xv: np.ndarray,
    yv: np.ndarray,
    config: TrainConfig,
    transform: Callable | None = None,
):
    """Minimize the summed NLL; keep the epoch with the best validation macro F1."""
    y = np.asarray(y, dtype=np.int64)
    yv = np.asarray(yv, dtype=np.int64)
    running = {"pred": [], "true": []}

    def step(idx, rng):
        xb = x[idx]
        if transform is not None:
            xb = transform(xb, rng)
        acts = forward(spec, store, xb, "train", rng)
        loss = nll_loss(acts.output, y[idx])
        grads = backward(spec, store, acts, loss.grad)
        adam_step(store, grads, lr=config.lr)
        running["pred"].append(np.argmax(acts.output, axis=1))
        running["true"].append(y[idx])
        return loss.value

    def validate():
        probs = predict_probs(spec, store, xv)
        rep = evaluate(yv, probs[:, 1])
        val_loss = nll_loss(probs, yv).value / max(len(yv), 1) if len(yv) else float("nan")
        if running["pred"]:
            train_f1 = macro_f1(np.concatenate(running["true"]), np.concatenate(running["pred"]))
        else:
            train_f1 = float("nan")
        running["pred"].clear()
        running["true"].clear()
        metrics = {"train_f1": train_f1, "val_loss": float(val_loss), "val_f1": rep.macro_f1,
                   "val_auc": float("nan") if rep.auc is None else rep.auc}
        return rep.macro_f1, metrics

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 21]))
    return fit(store, len(x), config, step, validate, rng)


def write_classifier_history(path, history: list[dict]) -> None:
    """Rows ``epoch,split,loss,f1,auc``: one train and one val row per epoch."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["epoch", "split", "loss", "f1", "auc"])
        for h in history:
            if h["epoch"] > 0:
                wr.writerow([h["epoch"], "train", f"{h['train_loss']:.6g}", f"{h['train_f1']:.6g}", ""])
            wr.writerow([h["epoch"], "val", f"{h['val_loss']:.6g}", f"{h['val_f1']:.6g}", f"{h['val_auc']:.6g}"])


# -------------------------------------------------------------- image model

def init_from_segmentation(spec: NetworkSpec, seg_checkpoint: Checkpoint, rng: np.random.Generator) -> ParameterStore:
    """Copy encoder weights from a segmentation checkpoint; draw the rest at random."""
    store = init_params(spec, rng)
    shapes = spec.param_shapes()
    for key, value in seg_checkpoint.store.params.items():
        if not key.startswith("enc."):
            continue
        if key not in shapes:
            raise ShapeMismatch(f"checkpoint has encoder array {key} that the classifier lacks")
        if tuple(value.shape) != tuple(shapes[key]):
            raise ShapeMismatch(f"{key}: checkpoint shape {value.shape} vs classifier {shapes[key]}")
        store.params[key] = value.astype(store.params[key].dtype, copy=True)
    missing = [k for k in shapes if k.startswith("enc.") and k not in seg_checkpoint.store.params]
    if missing:
        raise ShapeMismatch(f"checkpoint lacks encoder arrays {missing[:3]}")
    return store


def train_classifier(
    images: np.ndarray,
    labels: np.ndarray,
    val_images: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
    encoder: EncoderConfig = QUICK_ENCODER,
    init: str = "random",
    seg_checkpoint: Checkpoint | None = None,
    dropout: float = 0.25,
) -> ClassifierResult:
    """Train the image classifier on uint8 patches; augmentation applies to training batches only."""
    if init not in INITS:
        raise InvalidConfig(f"init must be one of {INITS}, got {init!r}")
    if init == "seg":
        if seg_checkpoint is None:
            raise ValidationError("init='seg' needs a segmentation checkpoint")
        encoder = EncoderConfig(**seg_checkpoint.meta["encoder"])
    spec = build_classifier(encoder, dropout=dropout)
    rng0 = np.random.default_rng(np.random.SeedSequence([config.seed, 20]))
    store = init_from_segmentation(spec, seg_checkpoint, rng0) if init == "seg" else init_params(spec, rng0)
    stats = fit_image_stats(images)
    x = normalize(images, stats)
    xv = normalize(val_images, stats)
    res = train_network(spec, store, x, labels, xv, val_labels, config,
                        _augment_images if config.augment else None)
    meta = {
        "kind": "classifier",
        "encoder": encoder.to_dict(),
        "init": init,
        "image_stats": stats.to_dict(),
        "train": config.to_dict(),
        "best_epoch": res.best_epoch,
        "val_f1": res.best_score,
        "n_train": int(len(images)),
    }
    return ClassifierResult(Checkpoint(spec, res.store, meta), res.history)


def predict(checkpoint: Checkpoint, images: np.ndarray) -> np.ndarray:
    """(p_low, p_high) rows for uint8 patches."""
    if checkpoint.meta.get("kind") == "fusion":
        raise ValidationError("use predict_fusion for fusion checkpoints")
    stats = Standardizer.from_dict(checkpoint.meta["image_stats"])
    return predict_probs(checkpoint.spec, checkpoint.store, normalize(images, stats))


def write_predictions(path, building_ids, probs: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["building_id", "p_low", "p_high", "pred_class"])
        for bid, (pl, ph) in zip(building_ids, probs):
            wr.writerow([bid, f"{pl:.6f}", f"{ph:.6f}", "High" if ph > pl else "Low"])


@dataclass
class CurvePoint:
    fraction: float
    init: str
    n_train: int
    val_f1: float
    test_f1: float
    test_auc: float | None
    best_epoch: int


def low_data_curve(
    images: np.ndarray,
    labels: np.ndarray,
    val_images: np.ndarray,
    val_labels: np.ndarray,
    test_images: np.ndarray,
    test_labels: np.ndarray,
    config: TrainConfig,
    fractions=LOW_DATA_FRACTIONS,
    inits=INITS,
    seg_checkpoint: Checkpoint | None = None,
    encoder: EncoderConfig = QUICK_ENCODER,
    subset_seed: int | None = None,
    on_point: Callable[[CurvePoint], None] | None = None,
) -> list[CurvePoint]:
    """Test macro F1 per (fraction, init) on nested, label-stratified training subsets."""
    subsets = nested_indices(labels, fractions, config.seed if subset_seed is None else subset_seed)
    points = []
    for f in sorted(subsets):
        idx = subsets[f]
        for init in inits:
            res = train_classifier(images[idx], labels[idx], val_images, val_labels, config, encoder, init, seg_checkpoint)
            probs = predict(res.checkpoint, test_images)
            rep = evaluate(test_labels, probs[:, 1])
            pt = CurvePoint(f, init, int(len(idx)), res.checkpoint.meta["val_f1"], rep.macro_f1, rep.auc,
                            res.checkpoint.meta["best_epoch"])
            points.append(pt)
            if on_point is not None:
                on_point(pt)
    return points


# ------------------------------------------------------------------- fusion

@dataclass(frozen=True)
class FusionSpec:
    """Image branch (encoder + global max-pool), tabular MLP trunk, one dense softmax head."""

    image: NetworkSpec
    tabular: NetworkSpec
    head: NetworkSpec

    @property
    def feature_dims(self) -> tuple[int, int]:
        return self.image.output_shape[-1], self.tabular.output_shape[-1]

    def to_dict(self) -> dict:
        return {"image": self.image.to_dict(), "tabular": self.tabular.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "FusionSpec":
        return cls(NetworkSpec.from_dict(d["image"]), NetworkSpec.from_dict(d["tabular"]), NetworkSpec.from_dict(d["head"]))

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {**self.image.param_shapes(), **self.tabular.param_shapes(), **self.head.param_shapes()}


def build_fusion(encoder: EncoderConfig, tab_dim: int, dropout: float = 0.25, n_classes: int = 2) -> FusionSpec:
    enc = build_encoder(encoder)
    f = enc.output_shape[-1]
    image = enc + NetworkSpec(enc.output_shape, (GlobalMaxPool("head.gmp"), Dropout("head.drop", dropout)))
    tabular = build_mlp_trunk(tab_dim, dropout, prefix="mlp")
    width = f + MLP_HIDDEN[-1]
    head = NetworkSpec((width,), (Dense("fuse.dense", width, n_classes), Softmax("fuse.softmax")))
    return FusionSpec(image, tabular, head)


def fusion_init(fspec: FusionSpec, rng: np.random.Generator) -> ParameterStore:
    params = {}
    for part in (fspec.image, fspec.tabular, fspec.head):
        params.update(init_params(part, rng).params)
    return ParameterStore(params)


def fusion_forward(fspec: FusionSpec, params, xi, xt, mode: str = "eval", rng=None):
    ai = forward(fspec.image, params, xi, mode, rng)
    at = forward(fspec.tabular, params, xt, mode, rng)
    z = np.concatenate([ai.output, at.output], axis=1)
    ah = forward(fspec.head, params, z, mode, rng)
    return ah.output, (ai, at, ah)


def fusion_backward(fspec: FusionSpec, params, state, dprobs) -> dict[str, np.ndarray]:
    ai, at, ah = state
    gh, dz = backward(fspec.head, params, ah, dprobs, return_input=True)
    f = ai.output.shape[1]
    gi = backward(fspec.image, params, ai, dz[:, :f])
    gt = backward(fspec.tabular, params, at, dz[:, f:])
    out = {}
    for spec, g in ((fspec.image, gi), (fspec.tabular, gt), (fspec.head, gh)):
        out.update({k: g[k] for k in spec.param_shapes()})
    return out


def _copy_branch(store: ParameterStore, source: Checkpoint | None, prefix: str) -> None:
    if source is None:
        return
    for key, value in source.store.params.items():
        if key.startswith(prefix):
            if key not in store.params or store.params[key].shape != value.shape:
                raise ShapeMismatch(f"pretrained array {key} does not fit the fusion model")
            store.params[key] = value.astype(store.params[key].dtype, copy=True)


def _seed_head(store, fspec, image_checkpoint, tabular_checkpoint) -> None:
    # Stack the branch output layers so the fused head starts at the sum of their logits.
    f = fspec.feature_dims[0]
    w, b = store.params["fuse.dense.w"], store.params["fuse.dense.b"]
    parts = []
    if image_checkpoint is not None and "head.dense.w" in image_checkpoint.store.params:
        w[:f] = image_checkpoint.store.params["head.dense.w"]
        parts.append(image_checkpoint.store.params["head.dense.b"])
    if tabular_checkpoint is not None and "mlp.out.w" in tabular_checkpoint.store.params:
        w[f:] = tabular_checkpoint.store.params["mlp.out.w"]
        parts.append(tabular_checkpoint.store.params["mlp.out.b"])
    if parts:
        b[:] = np.sum(parts, axis=0)


def train_fusion(
    images: np.ndarray,
    tabular: np.ndarray,
    labels: np.ndarray,
    val_images: np.ndarray,
    val_tabular: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
    encoder: EncoderConfig = QUICK_ENCODER,
    image_checkpoint: Checkpoint | None = None,
    tabular_checkpoint: Checkpoint | None = None,
) -> ClassifierResult:
    """Joint training of the fused model.

    Branches start from the given image classifier and tabular MLP checkpoints
    when provided (otherwise at random); the fused head then starts from their stacked output layers.
    """
    if image_checkpoint is not None:
        encoder = EncoderConfig(**image_checkpoint.meta["encoder"])
    fspec = build_fusion(encoder, tabular.shape[1])
    rng0 = np.random.default_rng(np.random.SeedSequence([config.seed, 30]))
    store = fusion_init(fspec, rng0)
    _copy_branch(store, image_checkpoint, "enc.")
    _copy_branch(store, tabular_checkpoint, "mlp.dense")
    _seed_head(store, fspec, image_checkpoint, tabular_checkpoint)
    istats = fit_image_stats(images)
    tstats = fit_standardizer(tabular)
    xi, xt = normalize(images, istats), normalize(tabular, tstats)
    vi, vt = normalize(val_images, istats), normalize(val_tabular, tstats)
    y = np.asarray(labels, dtype=np.int64)
    yv = np.asarray(val_labels, dtype=np.int64)

    def step(idx, rng):
        xb = _augment_images(xi[idx], rng) if config.augment else xi[idx]
        probs, state = fusion_forward(fspec, store, xb, xt[idx], "train", rng)
        loss = nll_loss(probs, y[idx])
        grads = fusion_backward(fspec, store, state, loss.grad)
        adam_step(store, grads, lr=config.lr)
        return loss.value

    def validate():
        probs = _fusion_probs(fspec, store, vi, vt)
        rep = evaluate(yv, probs[:, 1])
        val_loss = nll_loss(probs, yv).value / max(len(yv), 1)
        return rep.macro_f1, {"train_f1": float("nan"), "val_loss": float(val_loss), "val_f1": rep.macro_f1,
                              "val_auc": float("nan") if rep.auc is None else rep.auc}

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 31]))
    res = fit(store, len(xi), config, step, validate, rng)
    meta = {
        "kind": "fusion",
        "fusion_spec": fspec.to_dict(),
        "encoder": encoder.to_dict(),
        "image_stats": istats.to_dict(),
        "tabular_stats": tstats.to_dict(),
        "train": config.to_dict(),
        "best_epoch": res.best_epoch,
        "val_f1": res.best_score,
    }
    return ClassifierResult(Checkpoint(None, res.store, meta), res.history)


def _fusion_probs(fspec: FusionSpec, params, xi, xt, batch: int = EVAL_BATCH) -> np.ndarray:
    out = [fusion_forward(fspec, params, xi[i:i + batch], xt[i:i + batch])[0] for i in range(0, len(xi), batch)]
    return np.concatenate(out).astype(np.float64) if out else np.zeros((0, 2))


def predict_fusion(checkpoint: Checkpoint, images: np.ndarray, tabular: np.ndarray) -> np.ndarray:
    fspec = FusionSpec.from_dict(checkpoint.meta["fusion_spec"])
    istats = Standardizer.from_dict(checkpoint.meta["image_stats"])
    tstats = Standardizer.from_dict(checkpoint.meta["tabular_stats"])
    return _fusion_probs(fspec, checkpoint.store, normalize(images, istats), normalize(tabular, tstats))
