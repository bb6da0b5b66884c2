"""Labeled samples, stratified splits, nested subsets, augmentation and normalization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    DegenerateFeature,
    MissingCell,
    NoEligibleImage,
    NoStableBills,
    OutOfBounds,
    TooFewSamples,
    UnknownWard,
    ValidationError,
)
from ..imaging import bilinear_sample, points_in_polygon
from .loaders import load_billing, load_census, load_footprints, load_viirs, load_wards
from .patches import ImageIndex, ImagePatch, Raster, footprint_mask, load_raster_dir, match_pre_electrification_patch
from .records import TierLabel, assign_label, compute_stable_consumption, month_year
from .tables import attach_census, attach_nightlight

SPLIT_FRACTIONS = (0.75, 0.15, 0.10)
MIN_STRATUM = 10
ZOOM_MAX = 1.15


@dataclass
class Sample:
    building_id: str
    patch: ImagePatch
    label: TierLabel
    kwh: float
    constituency_id: str
    ward_id: str
    county_id: str
    connection_year: int
    census: np.ndarray | None = None
    nightlight: float | None = None
    footprint: np.ndarray | None = None  # lon/lat ring, when footprints are available
    footprint_mask: np.ndarray | None = None  # the ring rasterized over the patch

    def __post_init__(self):
        if self.census is not None and np.shape(self.census) != (17,):
            raise ValidationError(f"{self.building_id}: census vector must have 17 entries")

    @property
    def y(self) -> int:
        return self.label.class_index


@dataclass
class BuildReport:
    n_records: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.dropped[reason] = self.dropped.get(reason, 0) + 1


@dataclass
class SampleSet:
    labeled: list[Sample]  # Low / High
    mid: list[Sample]  # ExcludedMid, kept for the hard-set evaluation
    report: BuildReport


def _assign_wards(records, wards) -> dict[str, tuple[str, str, str]]:
    ids = list(records)
    lon = np.array([records[i].location[0] for i in ids])
    lat = np.array([records[i].location[1] for i in ids])
    out = {}
    for w in wards:
        hit = points_in_polygon(lon, lat, w.ring)
        for j in np.flatnonzero(hit):
            out.setdefault(ids[j], (w.ward_id, w.constituency_id, w.county_id))
    return out


def build_samples(data_dir, patch_size: int = 128, strict_dates: bool = False) -> SampleSet:
    """Join billing, imagery, wards, census and nightlights into labeled samples.

    Buildings are processed in building-id order; every exclusion is counted
    in the returned report.
    """
    data_dir = Path(data_dir)
    billing = load_billing(data_dir / "billing.csv")
    wards = load_wards(data_dir / "wards.geojson")
    index = ImageIndex(load_raster_dir(data_dir / "rasters"))
    census = load_census(data_dir / "census.csv") if (data_dir / "census.csv").exists() else None
    viirs = None
    if (data_dir / "viirs.csv").exists():
        viirs = load_viirs(data_dir / "viirs.csv", data_dir / "viirs_grid.json")
    fp_path = data_dir / "footprints.geojson"
    footprints = load_footprints(fp_path) if fp_path.exists() else {}

    report = BuildReport(n_records=len(billing.records))
    report.dropped["multi_customer"] = len(billing.dropped_multi_customer)
    ward_of = _assign_wards(billing.records, wards)
    labeled, mid = [], []
    for bid in sorted(billing.records):
        rec = billing.records[bid]
        try:
            stable = compute_stable_consumption(rec)
        except NoStableBills:
            report.drop("no_stable_bills")
            continue
        if bid not in ward_of:
            report.drop("no_ward")
            continue
        ward_id, constituency_id, county_id = ward_of[bid]
        lon, lat = rec.location
        try:
            patch = match_pre_electrification_patch(lon, lat, rec.connection_month, index, patch_size, strict_dates)
        except (NoEligibleImage, OutOfBounds):
            report.drop("no_eligible_image")
            continue
        year = month_year(rec.connection_month)
        cvec = night = None
        try:
            if census is not None:
                cvec = attach_census(ward_id, census)
            if viirs is not None:
                night = attach_nightlight(lon, lat, year, viirs)
        except (UnknownWard, MissingCell):
            report.drop("missing_tabular")
            continue
        label = assign_label(stable.mean_kwh_per_month)
        ring = footprints.get(bid)
        fmask = None
        if ring is not None:
            r0, c0 = patch.origin_px
            fmask = footprint_mask(index.find(lon, lat), [ring], r0, c0, patch_size)
        s = Sample(bid, patch, label, stable.mean_kwh_per_month, constituency_id, ward_id, county_id, year,
                   cvec, night, ring, fmask)
        (mid if label is TierLabel.EXCLUDED_MID else labeled).append(s)
    return SampleSet(labeled, mid, report)


def segmentation_windows(
    rasters: list[Raster],
    footprints: dict[str, np.ndarray],
    n: int,
    seed: int,
    size: int = 128,
    min_cover: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Random ``(patches, masks)`` windows; masks rasterize every footprint in the raster.

    Windows whose mask covers less than ``min_cover`` of the pixels are redrawn
    (up to 20 times), which drops patches with missing polygons.
    """
    if not rasters:
        raise ValidationError("no rasters to cut segmentation windows from")
    masks = []
    for r in rasters:
        h, w = r.shape
        rings = []
        for ring in footprints.values():
            px = r.to_pixels(ring)
            if px[:, 0].max() >= 0 and px[:, 0].min() <= w and px[:, 1].max() >= 0 and px[:, 1].min() <= h:
                rings.append(ring)
        masks.append(footprint_mask(r, rings))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    xs = np.empty((n, size, size, 3), dtype=np.uint8)
    ys = np.empty((n, size, size), dtype=np.uint8)
    for i in range(n):
        for _ in range(20):
            k = int(rng.integers(len(rasters)))
            h, w = rasters[k].shape
            r0 = int(rng.integers(0, h - size + 1))
            c0 = int(rng.integers(0, w - size + 1))
            m = masks[k][r0:r0 + size, c0:c0 + size]
            if m.mean() >= min_cover:
                break
        xs[i] = rasters[k].pixels[r0:r0 + size, c0:c0 + size]
        ys[i] = m
    return xs, ys


# ------------------------------------------------------------------ splitting

@dataclass(frozen=True)
class SplitSet:
    train: list
    val: list
    test: list
    seed: int


def _strata(samples) -> dict[int, list]:
    groups: dict[int, list] = {}
    for s in sorted(samples, key=lambda s: s.building_id):
        if s.label is TierLabel.EXCLUDED_MID:
            raise ValidationError("mid-band samples must be withheld before splitting")
        groups.setdefault(s.label.class_index, []).append(s)
    return groups


def stratified_split(samples, fractions=SPLIT_FRACTIONS, seed: int = 0) -> SplitSet:
    """Per-label shuffled split; input order does not matter."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValidationError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    train, val, test = [], [], []
    groups = _strata(samples)
    for k in (0, 1):
        members = groups.get(k, [])
        if len(members) < MIN_STRATUM:
            raise TooFewSamples(f"class {k} has {len(members)} samples; at least {MIN_STRATUM} are needed")
    for k in sorted(groups):
        members = groups[k]
        order = rng.permutation(len(members))
        n = len(members)
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        train += [members[i] for i in order[:n_train]]
        val += [members[i] for i in order[n_train:n_train + n_val]]
        test += [members[i] for i in order[n_train + n_val:]]
    key = lambda s: s.building_id  # noqa: E731
    return SplitSet(sorted(train, key=key), sorted(val, key=key), sorted(test, key=key), seed)


def nested_indices(labels, fractions, seed: int = 0) -> dict[float, np.ndarray]:
    """Label-stratified index subsets; each smaller fraction is contained in every larger one."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    classes = np.unique(labels)
    orders = {k: np.flatnonzero(labels == k)[rng.permutation(np.count_nonzero(labels == k))] for k in classes}
    out = {}
    for f in sorted(fractions):
        if not 0 < f <= 1:
            raise ValidationError(f"fraction {f} outside (0, 1]")
        parts = [orders[k][:max(1, int(round(f * len(orders[k]))))] for k in classes]
        out[f] = np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.intp)
    return out


def nested_subsets(samples, fractions, seed: int = 0) -> dict[float, list]:
    ordered = [s for _, group in sorted(_strata(samples).items()) for s in group]
    ordered.sort(key=lambda s: s.building_id)
    idx = nested_indices([s.y for s in ordered], fractions, seed)
    return {f: [ordered[i] for i in ix] for f, ix in idx.items()}


# --------------------------------------------------------------- augmentation

def flip_h(x: np.ndarray) -> np.ndarray:
    return x[:, ::-1]


def flip_v(x: np.ndarray) -> np.ndarray:
    return x[::-1]


def rot90(x: np.ndarray, k: int = 1) -> np.ndarray:
    return np.rot90(x, k, axes=(0, 1))


def zoom(x: np.ndarray, scale: float) -> np.ndarray:
    """Magnify about the centre by ``scale`` and crop back to the input size (bilinear)."""
    if scale == 1.0:
        return x.copy()
    h, w = x.shape[:2]
    ys = (np.arange(h) + 0.5 - h / 2) / scale + h / 2 - 0.5
    xs = (np.arange(w) + 0.5 - w / 2) / scale + w / 2 - 0.5
    out = bilinear_sample(x, ys, xs)
    if np.issubdtype(x.dtype, np.integer):
        return np.clip(np.rint(out), np.iinfo(x.dtype).min, np.iinfo(x.dtype).max).astype(x.dtype)
    return out.astype(x.dtype)


def augment(patch: np.ndarray, rng: np.random.Generator, *others: np.ndarray):
    """Random flips, quarter turns and a zoom in [1, 1.15].

    Extra arrays (masks, pointer channels) get the same geometric transform;
    they are returned after the patch when given.
    """
    hflip, vflip = rng.random(2) < 0.5
    k = int(rng.integers(4))
    scale = float(rng.uniform(1.0, ZOOM_MAX))
    out = []
    for x in (patch,) + others:
        if hflip:
            x = flip_h(x)
        if vflip:
            x = flip_v(x)
        x = rot90(x, k)
        out.append(np.ascontiguousarray(zoom(x, scale)))
    return out[0] if not others else tuple(out)


# -------------------------------------------------------------- normalization

@dataclass(frozen=True)
class Standardizer:
    """Per-feature (last axis) z-score after an optional input scale."""

    mean: np.ndarray
    std: np.ndarray
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64), float(d["scale"]))


def fit_standardizer(train: np.ndarray, scale: float = 1.0) -> Standardizer:
    x = np.asarray(train, dtype=np.float64) * scale
    flat = x.reshape(-1, x.shape[-1])
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    flat_cols = std <= 1e-12 * np.maximum(1.0, np.abs(mean))  # rounding residue counts as constant
    if np.any(flat_cols):
        warnings.warn(f"zero-variance features {np.flatnonzero(flat_cols).tolist()}; using std 1", DegenerateFeature)
        std = np.where(flat_cols, 1.0, std)
    return Standardizer(mean, std, scale)


def fit_image_stats(train_images: np.ndarray) -> Standardizer:
    """Channel statistics of training patches after scaling to [0, 1]."""
    return fit_standardizer(train_images, 1.0 / 255.0)


def normalize(x: np.ndarray, stats: Standardizer, dtype=np.float32) -> np.ndarray:
    out = (np.asarray(x, dtype=np.float64) * stats.scale - stats.mean) / stats.std
    return out.astype(dtype)


def stack_patches(samples) -> np.ndarray:
    return np.stack([s.patch.pixels for s in samples]) if samples else np.zeros((0, 128, 128, 3), np.uint8)


def labels_of(samples) -> np.ndarray:
    return np.array([s.y for s in samples], dtype=np.int64)
