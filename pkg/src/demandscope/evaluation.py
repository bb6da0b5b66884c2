"""Classification metrics, hard-set evaluation, Grad-CAM and county-level survey validation."""
from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ShapeMismatch, SingleClassSet, TooFewCounties, ValidationError, ZeroVariance
from .imaging import bilinear_resize, write_png
from .nn import Activations, NetworkSpec, backward, forward
from .nn.layers import Conv2D, Dense, ReLU
from .pipeline.records import HIGH_MIN_KWH, LOW_MAX_KWH

MIN_SURVEY_SAMPLES = 15


# -------------------------------------------------------------------- metrics

def confusion(y_true, y_pred) -> tuple[int, int, int, int]:
    """(tn, fp, fn, tp) with High = 1 as the positive class."""
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    if t.shape != p.shape:
        raise ShapeMismatch("label and prediction lengths differ")
    return (int(np.sum(~t & ~p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(t & p)))


def _f1(tp: int, fp: int, fn: int) -> Fraction:
    denom = 2 * tp + fp + fn
    return Fraction(2 * tp, denom) if denom else Fraction(0)


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over the classes present in labels or predictions.

    Computed in exact rational arithmetic and rounded once.
    """
    tn, fp, fn, tp = confusion(y_true, y_pred)
    scores = []
    if tp + fn + fp:  # High present
        scores.append(_f1(tp, fp, fn))
    if tn + fp + fn:  # Low present
        scores.append(_f1(tn, fn, fp))
    return float(sum(scores) / len(scores)) if scores else 0.0


def auc(y_true, scores) -> float:
    """Rank (Mann-Whitney) AUC with tied scores sharing ranks."""
    t = np.asarray(y_true).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int(t.sum())
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassSet("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[t].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class EvalReport:
    n_low: int
    n_high: int
    tn: int
    fp: int
    fn: int
    tp: int
    tn_rate: float
    fp_rate: float
    fn_rate: float
    tp_rate: float
    macro_f1: float
    auc: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _rate(a: int, b: int) -> float:
    return a / (a + b) if a + b else float("nan")


def evaluate(y_true, p_high, y_pred=None) -> EvalReport:
    """Class rates, macro F1 and AUC. ``y_pred`` defaults to ``p_high >= 0.5``."""
    y_true = np.asarray(y_true).astype(np.int64)
    p_high = np.asarray(p_high, dtype=np.float64)
    if y_pred is None:
        y_pred = (p_high >= 0.5).astype(np.int64)
    tn, fp, fn, tp = confusion(y_true, y_pred)
    try:
        a = auc(y_true, p_high)
    except SingleClassSet:
        a = None
    return EvalReport(
        n_low=tn + fp, n_high=fn + tp, tn=tn, fp=fp, fn=fn, tp=tp,
        tn_rate=_rate(tn, fp), fp_rate=_rate(fp, tn), fn_rate=_rate(fn, tp), tp_rate=_rate(tp, fn),
        macro_f1=macro_f1(y_true, y_pred) if len(y_true) else float("nan"), auc=a,
    )


def evaluate_hard_set(p_high, kwh, thres: float = LOW_MAX_KWH, y_pred=None) -> EvalReport:
    """Score mid-band households with the contiguous convention: Low iff kWh <= ``thres``."""
    kwh = np.asarray(kwh, dtype=np.float64)
    labels = (kwh > thres).astype(np.int64)
    return evaluate(labels, p_high, y_pred)


def report_markdown(reports: dict[str, EvalReport]) -> str:
    lines = ["| model | TN | TP | macro F1 | AUC | n low | n high |", "|---|---|---|---|---|---|---|"]
    for name, r in reports.items():
        a = "n/a" if r.auc is None else f"{r.auc:.3f}"
        lines.append(f"| {name} | {r.tn_rate:.3f} | {r.tp_rate:.3f} | {r.macro_f1:.3f} | {a} | {r.n_low} | {r.n_high} |")
    return "\n".join(lines) + "\n"


def write_reports(out_dir, reports: dict[str, EvalReport], stem: str = "report") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {k: v.to_dict() for k, v in reports.items()}
    (out / f"{stem}.json").write_text(json.dumps(payload, indent=1, sort_keys=True, default=_json_default) + "\n")
    (out / f"{stem}.md").write_text(report_markdown(reports))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


# ------------------------------------------------------------------- Grad-CAM

def last_conv_index(spec: NetworkSpec) -> int:
    """Index of the activation after the final encoder convolution (its ReLU when present)."""
    idx = max(i for i, l in enumerate(spec.layers) if isinstance(l, Conv2D) and l.name.startswith("enc."))
    if idx + 1 < len(spec.layers) and isinstance(spec.layers[idx + 1], ReLU):
        idx += 1
    return idx + 1


def _logit_index(spec: NetworkSpec) -> int:
    return max(i for i, l in enumerate(spec.layers) if isinstance(l, Dense)) + 1


def grad_cam(spec: NetworkSpec, params, x: np.ndarray, target_class: int, layer: int | None = None,
             acts: Activations | None = None) -> np.ndarray:
    """Class activation map for one normalized input ``x`` (H, W, C).

    Channel weights are the spatial means of the target logit's gradient with
    respect to activation ``layer`` (default: after the last encoder
    convolution). The ReLU of the weighted sum is bilinearly upsampled to the
    input size and scaled to a maximum of one.
    """
    if layer is None:
        layer = last_conv_index(spec)
    if acts is None:
        acts = forward(spec, params, x[None], "eval")
    top = _logit_index(spec)
    logits = acts.outputs[top]
    seed = np.zeros_like(logits)
    seed[0, target_class] = 1.0
    _, dA = backward(spec, params, acts, seed, start=top, stop=layer, return_input=True)
    A = acts.outputs[layer][0].astype(np.float64)
    weights = dA[0].astype(np.float64).mean(axis=(0, 1))
    cam = np.maximum(A @ weights, 0.0)
    h, w = x.shape[:2]
    heat = np.maximum(bilinear_resize(cam, h, w), 0.0)
    peak = heat.max()
    return heat / peak if peak > 0 else heat


def heatmap_contrast(heat: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """Mean heatmap value inside and outside a footprint mask."""
    m = np.asarray(mask).astype(bool)
    inside = float(heat[m].mean()) if m.any() else float("nan")
    outside = float(heat[~m].mean()) if (~m).any() else float("nan")
    return inside, outside


def write_heatmap(stem, heat: np.ndarray, patch: np.ndarray, alpha: float = 0.5) -> None:
    """``<stem>_cam.png`` (8-bit grayscale) and ``<stem>_overlay.png`` (red overlay on the patch)."""
    gray = np.rint(np.clip(heat, 0, 1) * 255).astype(np.uint8)
    write_png(f"{stem}_cam.png", gray)
    red = np.zeros_like(patch, dtype=np.float64)
    red[..., 0] = 255.0
    a = alpha * np.clip(heat, 0, 1)[..., None]
    overlay = np.rint((1 - a) * patch.astype(np.float64) + a * red).astype(np.uint8)
    write_png(f"{stem}_overlay.png", overlay)


# ------------------------------------------------------- survey validation

def weighted_pearson(x, y, w) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not (x.shape == y.shape == w.shape) or x.ndim != 1:
        raise ShapeMismatch("x, y and w must be equal-length vectors")
    if len(x) < 3:
        raise ValidationError("weighted Pearson needs at least three points")
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    mx = np.sum(w * x) / np.sum(w)
    my = np.sum(w * y) / np.sum(w)
    dx, dy = x - mx, y - my
    sxx = np.sum(w * dx * dx)
    syy = np.sum(w * dy * dy)
    if sxx <= 0 or syy <= 0:
        raise ZeroVariance("weighted variance of x or y is zero")
    r = np.sum(w * dx * dy) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def permutation_p(r_observed: float, x, y, w, n_perm: int = 10_000, seed: int = 0) -> float:
    """Two-sided permutation p-value for a weighted correlation, permuting ``y``."""
    if n_perm <= 0:
        return 1.0
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    hits = 0
    target = abs(r_observed) - 1e-12
    for _ in range(n_perm):
        perm = rng.permutation(y)
        try:
            r = weighted_pearson(x, perm, w)
        except ZeroVariance:
            continue
        hits += abs(r) >= target
    return (1 + hits) / (n_perm + 1)


@dataclass
class CountyRow:
    county_id: str
    predicted_high_share: float
    surveyed_high_share: float
    survey_n: int
    n_predicted: int


@dataclass
class CountyValidation:
    counties: list[CountyRow]
    r: float
    p: float
    n_counties: int
    skipped_small: list[str] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def surveyed_shares(survey) -> dict[str, tuple[float, int]]:
    """County -> (weighted High share among Low/High respondents, total respondents)."""
    num: dict[str, float] = {}
    den: dict[str, float] = {}
    count: dict[str, int] = {}
    for row in survey:
        c = row.county_id
        count[c] = count.get(c, 0) + 1
        num.setdefault(c, 0.0)
        den.setdefault(c, 0.0)
        if row.reported_kwh <= LOW_MAX_KWH:
            den[c] += row.sample_weight
        elif row.reported_kwh >= HIGH_MIN_KWH:
            den[c] += row.sample_weight
            num[c] += row.sample_weight
    return {c: (num[c] / den[c] if den[c] > 0 else float("nan"), count[c]) for c in count}


def county_validation(
    predictions: dict[str, list[int]],
    survey,
    min_samples: int = MIN_SURVEY_SAMPLES,
    exclude=(),
    n_perm: int = 10_000,
    seed: int = 0,
) -> CountyValidation:
    """Correlate predicted and surveyed High shares across counties.

    ``predictions`` maps county id to predicted classes (1 = High) of its
    buildings. Counties with fewer than ``min_samples`` survey rows, or listed
    in ``exclude``, are left out; weights are survey row counts.
    """
    surveyed = surveyed_shares(survey)
    rows, skipped, excluded = [], [], []
    for county in sorted(surveyed):
        share, n = surveyed[county]
        if n < min_samples:
            skipped.append(county)
            continue
        if county in exclude:
            excluded.append(county)
            continue
        preds = predictions.get(county)
        if not preds or math.isnan(share):
            skipped.append(county)
            continue
        rows.append(CountyRow(county, float(np.mean(preds)), share, n, len(preds)))
    if len(rows) < 3:
        raise TooFewCounties(f"only {len(rows)} counties qualify; at least 3 are needed")
    x = [r.predicted_high_share for r in rows]
    y = [r.surveyed_high_share for r in rows]
    w = [r.survey_n for r in rows]
    r = weighted_pearson(x, y, w)
    p = permutation_p(r, x, y, w, n_perm, seed)
    return CountyValidation(rows, r, p, len(rows), skipped, excluded)
