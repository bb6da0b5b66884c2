"""Baselines: historical constituency averages, tabular MLPs, roof characteristics."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .architectures import build_mlp
from .classifier import ClassifierResult, predict_probs, train_network
from .errors import EmptyMask, InvalidConfig, NoHistory, ValidationError
from .nn import Checkpoint, init_params
from .pipeline.dataset import Standardizer, fit_standardizer, normalize
from .pipeline.records import LOW_MAX_KWH, TierLabel
from .pipeline.tables import CENSUS_GROUPS, census_group_columns
from .segmentation import segment
from .training import TrainConfig

ROOF_SETS = {"roof-area": [0], "roof-color": [1, 2, 3], "roof-both": [0, 1, 2, 3]}


# ------------------------------------------------------------------ Model A

@dataclass
class ConstituencyHistory:
    """(constituency, year) -> (mean stable kWh of earlier connections, count)."""

    table: dict[tuple[str, int], tuple[float, int]]
    national: dict[int, tuple[float, int]] = field(default_factory=dict)

    def lookup(self, constituency: str, year: int) -> tuple[float, int]:
        try:
            return self.table[(constituency, year)]
        except KeyError:
            raise NoHistory(f"no connections in {constituency} before {year}") from None


def _prior_means(entries: list[tuple[int, float]], years) -> dict[int, tuple[float, int]]:
    entries = sorted(entries)
    out = {}
    for t in years:
        vals = [k for y, k in entries if y < t]
        if vals:
            out[t] = (float(np.mean(vals)), len(vals))
    return out


def build_history(households, years=None) -> ConstituencyHistory:
    """``households``: iterable of (constituency_id, connection_year, stable_kwh).

    The mean for year t uses only households connected strictly before t.
    """
    rows = [(str(c), int(y), float(k)) for c, y, k in households]
    if years is None:
        ys = {y for _, y, _ in rows}
        years = sorted(ys | {y + 1 for y in ys})
    by_c: dict[str, list[tuple[int, float]]] = {}
    for c, y, k in rows:
        by_c.setdefault(c, []).append((y, k))
    table = {}
    for c in sorted(by_c):
        for t, v in _prior_means(by_c[c], years).items():
            table[(c, t)] = v
    national = _prior_means([(y, k) for _, y, k in rows], years)
    return ConstituencyHistory(table, national)


def model_a_predict(history: ConstituencyHistory, constituency: str, year: int, thres: float = LOW_MAX_KWH) -> TierLabel:
    mean, _ = history.lookup(constituency, year)
    return TierLabel.HIGH if mean > thres else TierLabel.LOW


@dataclass
class ModelAResult:
    building_ids: list[str]
    predicted: np.ndarray  # 1 = High
    fallback: np.ndarray  # True where the national mean was used
    unpredictable: list[str]  # no history anywhere in the country


def model_a_run(history: ConstituencyHistory, samples, thres: float = LOW_MAX_KWH) -> ModelAResult:
    """Predict each sample's tier from its constituency's history in its connection year."""
    ids, preds, flags, none = [], [], [], []
    for s in samples:
        try:
            label, flag = model_a_predict(history, s.constituency_id, s.connection_year, thres), False
        except NoHistory:
            if s.connection_year not in history.national:
                none.append(s.building_id)
                continue
            label = TierLabel.HIGH if history.national[s.connection_year][0] > thres else TierLabel.LOW
            flag = True
        ids.append(s.building_id)
        preds.append(label.class_index)
        flags.append(flag)
    return ModelAResult(ids, np.array(preds, dtype=np.int64), np.array(flags, dtype=bool), none)


def write_history_report(path, history: ConstituencyHistory, thres: float = LOW_MAX_KWH) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["constituency_id", "year", "mean_kwh", "n", "predicted_class"])
        for (c, y), (mean, n) in sorted(history.table.items()):
            wr.writerow([c, y, f"{mean:.4f}", n, "High" if mean > thres else "Low"])


# -------------------------------------------------------------- tabular MLP

def feature_columns(feature_set: str) -> list[int] | None:
    """Columns of the 18-wide [census(17), nightlight] matrix, or None for roof sets."""
    if feature_set == "all":
        return list(range(18))
    if feature_set == "viirs":
        return [17]
    if feature_set == "census:all":
        return list(range(17))
    if feature_set.startswith("census:"):
        group = feature_set.split(":", 1)[1]
        if group not in CENSUS_GROUPS:
            raise InvalidConfig(f"unknown census group {group!r}; choose from {sorted(CENSUS_GROUPS)}")
        return census_group_columns(group)
    if feature_set in ROOF_SETS:
        return None
    raise InvalidConfig(f"unknown feature set {feature_set!r}")


def tabular_matrix(samples) -> np.ndarray:
    """[17 census fractions, nightlight radiance] per sample."""
    rows = []
    for s in samples:
        if s.census is None or s.nightlight is None:
            raise ValidationError(f"{s.building_id}: census and nightlight features are required")
        rows.append(np.append(s.census, s.nightlight))
    return np.array(rows, dtype=np.float64).reshape(-1, 18)


def train_tabular_mlp(
    features: np.ndarray,
    labels: np.ndarray,
    val_features: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
    dropout: float = 0.25,
    feature_set: str = "custom",
) -> ClassifierResult:
    """64/32/16 ReLU MLP on z-scored features (statistics from the training rows)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError("features must be a 2-D matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stats = fit_standardizer(features)
    spec = build_mlp(features.shape[1], dropout=dropout)
    store = init_params(spec, np.random.default_rng(np.random.SeedSequence([config.seed, 40])))
    res = train_network(spec, store, normalize(features, stats), labels, normalize(val_features, stats), val_labels,
                        config)
    meta = {
        "kind": "mlp",
        "feature_set": feature_set,
        "tabular_stats": stats.to_dict(),
        "train": config.to_dict(),
        "best_epoch": res.best_epoch,
        "val_f1": res.best_score,
    }
    return ClassifierResult(Checkpoint(spec, res.store, meta), res.history)


def predict_tabular(checkpoint: Checkpoint, features: np.ndarray) -> np.ndarray:
    stats = Standardizer.from_dict(checkpoint.meta["tabular_stats"])
    return predict_probs(checkpoint.spec, checkpoint.store, normalize(np.asarray(features, np.float64), stats))


# ---------------------------------------------------------------- Model D

@dataclass(frozen=True)
class RoofFeatures:
    area_m2: float
    mean_r: float
    mean_g: float
    mean_b: float
    fallback: bool = False

    def as_row(self) -> list[float]:
        return [self.area_m2, self.mean_r, self.mean_g, self.mean_b]


def roof_features_from_mask(patch: np.ndarray, mask: np.ndarray, meters_per_pixel: float = 0.5) -> RoofFeatures:
    m = np.asarray(mask).astype(bool)
    if not m.any():
        raise EmptyMask("mask has no pixels")
    px = patch[m].astype(np.float64)
    r, g, b = px.mean(axis=0)
    return RoofFeatures(float(m.sum()) * meters_per_pixel**2, float(r), float(g), float(b))


def _fallback_features(patch: np.ndarray, point, meters_per_pixel: float) -> RoofFeatures:
    r, c = point
    m = np.zeros(patch.shape[:2], dtype=bool)
    m[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2] = True
    f = roof_features_from_mask(patch, m, meters_per_pixel)
    return RoofFeatures(f.area_m2, f.mean_r, f.mean_g, f.mean_b, True)


def extract_roof_features(patch: np.ndarray, point, pointer_checkpoint: Checkpoint,
                          meters_per_pixel: float = 0.5, threshold: float = 0.5) -> RoofFeatures:
    """Roof area and mean raw RGB over the pointer-segmented footprint (3x3 fallback when empty)."""
    return extract_roof_features_batch(patch[None], [point], pointer_checkpoint, meters_per_pixel, threshold)[0]


def extract_roof_features_batch(patches: np.ndarray, points, pointer_checkpoint: Checkpoint,
                                meters_per_pixel: float = 0.5, threshold: float = 0.5) -> list[RoofFeatures]:
    probs = segment(pointer_checkpoint, patches, points)
    out = []
    for patch, point, prob in zip(patches, points, probs):
        mask = prob >= threshold
        if mask.any():
            out.append(roof_features_from_mask(patch, mask, meters_per_pixel))
        else:
            out.append(_fallback_features(patch, tuple(point), meters_per_pixel))
    return out


def roof_matrix(features: list[RoofFeatures]) -> np.ndarray:
    return np.array([f.as_row() for f in features], dtype=np.float64).reshape(-1, 4)


def model_d_train(
    roof: np.ndarray,
    labels: np.ndarray,
    val_roof: np.ndarray,
    val_labels: np.ndarray,
    feature_set: str,
    config: TrainConfig,
) -> ClassifierResult:
    """Tabular MLP on roof area, roof colour, or both (``roof-area`` / ``roof-color`` / ``roof-both``)."""
    if feature_set not in ROOF_SETS:
        raise InvalidConfig(f"roof feature set must be one of {sorted(ROOF_SETS)}")
    cols = ROOF_SETS[feature_set]
    return train_tabular_mlp(roof[:, cols], labels, val_roof[:, cols], val_labels, config, feature_set=feature_set)


def write_roof_features(path, building_ids, features: list[RoofFeatures]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["building_id", "area_m2", "mean_r", "mean_g", "mean_b"])
        for bid, f in zip(building_ids, features):
            wr.writerow([bid, f"{f.area_m2:.2f}", f"{f.mean_r:.3f}", f"{f.mean_g:.3f}", f"{f.mean_b:.3f}"])
