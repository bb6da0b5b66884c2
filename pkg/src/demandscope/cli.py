"""Command-line entry point: ``demandscope <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import PROFILES, encoder_config, load_config, train_config
from .errors import DemandScopeError, ValidationError
from .synth import LEVELS

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
FEATURE_CHOICES = "census:<group>, census:all, viirs, all, roof-area, roof-color, roof-both"


# ------------------------------------------------------------------ helpers

def _git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _require(value, flag: str):
    if value is None:
        raise ValidationError(f"{flag} is required for this subcommand")
    return value


def _data_dir(cfg) -> Path:
    d = Path(_require(cfg["data_dir"], "--data"))
    if not d.is_dir():
        raise ValidationError(f"data directory {d} does not exist")
    return d


def _samples(cfg):
    from .pipeline import build_samples

    return build_samples(_data_dir(cfg))


def _split(cfg, sample_set):
    from .pipeline import stratified_split

    return stratified_split(sample_set.labeled, seed=int(cfg["seed"]))


def _load_ckpt(path, kinds=None):
    from .nn import load_checkpoint

    p = Path(_require(path, "--checkpoint"))
    if not p.exists():
        raise ValidationError(f"checkpoint {p} not found")
    ck = load_checkpoint(p)
    if kinds and ck.meta.get("kind") not in kinds:
        raise ValidationError(f"{p} is a {ck.meta.get('kind')} checkpoint; expected one of {sorted(kinds)}")
    return ck


def _arrays(samples):
    from .pipeline import labels_of, stack_patches

    return stack_patches(samples), labels_of(samples)


# -------------------------------------------------------------- subcommands

def cmd_synth(cfg, args, out: Path) -> dict:
    from .synth import generate_world, world_spec, write_world

    overrides = {k: v for k, v in cfg["world"].items() if k != "level"}
    if args.counties is not None:
        overrides["n_counties"] = args.counties
    try:
        spec = world_spec(cfg["world"]["level"], seed=int(cfg["seed"]), **overrides)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad world settings: {exc}") from None
    world = generate_world(spec)
    write_world(world, out)
    tiers = {}
    for b in world.buildings:
        tiers[b.tier.value] = tiers.get(b.tier.value, 0) + 1
    return {"n_buildings": len(world.buildings), "tiers": tiers}


def cmd_pretrain_seg(cfg, args, out: Path) -> dict:
    from .nn import save_checkpoint
    from .pipeline.loaders import load_footprints
    from .pipeline.patches import load_raster_dir
    from .pipeline import segmentation_windows
    from .segmentation import HISTORY_FIELDS, train_segmenter
    from .training import write_history

    data = _data_dir(cfg)
    rasters = load_raster_dir(data / "rasters")
    footprints = load_footprints(data / "footprints.geojson")
    val_r = rasters[::5]
    train_r = [r for i, r in enumerate(rasters) if i % 5]
    sc = cfg["segmentation"]
    seed = int(cfg["seed"])
    x, y = segmentation_windows(train_r or rasters, footprints, sc["n_patches"], seed, min_cover=sc["min_cover"])
    xv, yv = segmentation_windows(val_r, footprints, sc["n_val_patches"], seed + 1)
    res = train_segmenter(x, y, xv, yv, train_config(cfg, "segmentation"), encoder_config(cfg))
    save_checkpoint(out / "seg.ckpt", res.checkpoint)
    write_history(out / "seg_history.csv", res.history, HISTORY_FIELDS)
    return {"best_epoch": res.checkpoint.meta["best_epoch"], "val_iou": res.checkpoint.meta["val_iou"]}


def _pointer_data(samples):
    from .pipeline import stack_patches

    keep = [s for s in samples if s.footprint_mask is not None]
    if not keep:
        raise ValidationError("no samples with footprints; pointer training needs footprints.geojson")
    x = stack_patches(keep)
    pts = [(s.patch.pixels.shape[0] // 2, s.patch.pixels.shape[1] // 2) for s in keep]
    m = np.stack([s.footprint_mask for s in keep])
    return x, pts, m


def cmd_tune_pointer(cfg, args, out: Path) -> dict:
    from .nn import save_checkpoint
    from .segmentation import HISTORY_FIELDS, finetune_pointer, train_segmenter
    from .training import write_history

    ss = _samples(cfg)
    samples = sorted(ss.labeled + ss.mid, key=lambda s: s.building_id)
    x, pts, m = _pointer_data(samples)
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg["seed"]), 6]))
    order = rng.permutation(len(x))
    n_val = max(1, int(round(cfg["pointer"]["val_fraction"] * len(x))))
    vi, ti = np.sort(order[:n_val]), np.sort(order[n_val:])
    tc = train_config(cfg, "pointer")
    sel = lambda idx: [pts[i] for i in idx]  # noqa: E731
    if args.checkpoint:
        base = _load_ckpt(args.checkpoint, {"pointer"})
        res = finetune_pointer(base, x[ti], sel(ti), m[ti], x[vi], sel(vi), m[vi], tc)
    else:
        res = train_segmenter(x[ti], m[ti], x[vi], m[vi], tc, encoder_config(cfg), points=sel(ti), val_points=sel(vi))
    save_checkpoint(out / "pointer.ckpt", res.checkpoint)
    write_history(out / "pointer_history.csv", res.history, HISTORY_FIELDS)
    return {"best_epoch": res.checkpoint.meta["best_epoch"], "val_iou": res.checkpoint.meta["val_iou"],
            "initial_val_iou": res.history[0]["val_iou"]}


def cmd_train_clf(cfg, args, out: Path) -> dict:
    from .baselines import feature_columns, tabular_matrix
    from .classifier import predict, predict_fusion, train_classifier, train_fusion, write_classifier_history, write_predictions
    from .evaluation import evaluate, write_reports
    from .nn import save_checkpoint

    sp = _split(cfg, _samples(cfg))
    (xt, yt), (xv, yv), (xe, ye) = _arrays(sp.train), _arrays(sp.val), _arrays(sp.test)
    init = args.init or "random"
    seg = _load_ckpt(args.checkpoint, {"segmenter"}) if init == "seg" else None
    if args.features:
        cols = feature_columns(args.features)
        if cols is None:
            raise ValidationError("fusion uses census/nightlight features, not roof sets")
        tt, tv, te = (tabular_matrix(s)[:, cols] for s in (sp.train, sp.val, sp.test))
        img = train_classifier(xt, yt, xv, yv, train_config(cfg, "classifier"), encoder_config(cfg), init, seg)
        from .baselines import train_tabular_mlp

        mlp = train_tabular_mlp(tt, yt, tv, yv, train_config(cfg, "mlp"), feature_set=args.features)
        res = train_fusion(xt, tt, yt, xv, tv, yv, train_config(cfg, "fusion"), image_checkpoint=img.checkpoint,
                           tabular_checkpoint=mlp.checkpoint)
        res.checkpoint.meta["features"] = args.features
        probs = predict_fusion(res.checkpoint, xe, te)
        name = "fusion.ckpt"
    else:
        res = train_classifier(xt, yt, xv, yv, train_config(cfg, "classifier"), encoder_config(cfg), init, seg)
        probs = predict(res.checkpoint, xe)
        name = "clf.ckpt"
    save_checkpoint(out / name, res.checkpoint)
    write_classifier_history(out / "clf_history.csv", res.history)
    write_predictions(out / "predictions_test.csv", [s.building_id for s in sp.test], probs)
    rep = evaluate(ye, probs[:, 1])
    write_reports(out, {f"image ({init})" if not args.features else f"fusion ({args.features})": rep})
    return {"test_macro_f1": rep.macro_f1, "best_epoch": res.checkpoint.meta["best_epoch"]}


def cmd_train_mlp(cfg, args, out: Path) -> dict:
    from .baselines import (
        ROOF_SETS,
        extract_roof_features_batch,
        feature_columns,
        model_d_train,
        predict_tabular,
        roof_matrix,
        tabular_matrix,
        train_tabular_mlp,
        write_roof_features,
    )
    from .classifier import write_classifier_history, write_predictions
    from .evaluation import evaluate, write_reports
    from .nn import save_checkpoint

    features = args.features or "all"
    sp = _split(cfg, _samples(cfg))
    parts = (sp.train, sp.val, sp.test)
    labels = [np.array([s.y for s in p], dtype=np.int64) for p in parts]
    tc = train_config(cfg, "mlp")
    if features in ROOF_SETS:
        ptr = _load_ckpt(args.checkpoint, {"pointer"})
        mats = []
        for name, p in zip(("train", "val", "test"), parts):
            x, _ = _arrays(p)
            centre = [(x.shape[1] // 2, x.shape[2] // 2)] * len(p)
            feats = extract_roof_features_batch(x, centre, ptr)
            write_roof_features(out / f"roof_features_{name}.csv", [s.building_id for s in p], feats)
            mats.append(roof_matrix(feats))
        res = model_d_train(mats[0], labels[0], mats[1], labels[1], features, tc)
        test_x = mats[2][:, ROOF_SETS[features]]
    else:
        cols = feature_columns(features)
        mats = [tabular_matrix(p)[:, cols] for p in parts]
        res = train_tabular_mlp(mats[0], labels[0], mats[1], labels[1], tc, feature_set=features)
        test_x = mats[2]
    probs = predict_tabular(res.checkpoint, test_x)
    save_checkpoint(out / "mlp.ckpt", res.checkpoint)
    write_classifier_history(out / "mlp_history.csv", res.history)
    write_predictions(out / "predictions_test.csv", [s.building_id for s in sp.test], probs)
    rep = evaluate(labels[2], probs[:, 1])
    write_reports(out, {f"mlp ({features})": rep})
    return {"test_macro_f1": rep.macro_f1}


def cmd_baseline_a(cfg, args, out: Path) -> dict:
    from .baselines import build_history, model_a_run, write_history_report
    from .evaluation import evaluate, write_reports

    ss = _samples(cfg)
    everyone = ss.labeled + ss.mid
    history = build_history((s.constituency_id, s.connection_year, s.kwh) for s in everyone)
    write_history_report(out / "model_a_history.csv", history)
    res = model_a_run(history, ss.labeled)
    truth = {s.building_id: s.y for s in ss.labeled}
    y = np.array([truth[b] for b in res.building_ids], dtype=np.int64)
    rep = evaluate(y, res.predicted.astype(np.float64))
    write_reports(out, {"model A": rep})
    return {"tn_rate": rep.tn_rate, "tp_rate": rep.tp_rate, "macro_f1": rep.macro_f1,
            "n_fallback": int(res.fallback.sum()), "n_unpredictable": len(res.unpredictable)}


def _population(data: Path):
    """Footprint centroids of every building in the data set, with their ward and county."""
    from .imaging import points_in_polygon
    from .pipeline.loaders import load_footprints, load_wards

    fps = load_footprints(data / "footprints.geojson")
    ids = sorted(fps)
    cent = np.array([fps[i][:-1].mean(axis=0) for i in ids]).reshape(-1, 2)
    county = {}
    for w in load_wards(data / "wards.geojson"):
        hit = points_in_polygon(cent[:, 0], cent[:, 1], w.ring)
        for j in np.flatnonzero(hit):
            county.setdefault(ids[j], w.county_id)
    return ids, cent, county


def population_patches(data: Path):
    from .errors import OutOfBounds
    from .pipeline.patches import ImageIndex, extract_patch, load_raster_dir

    index = ImageIndex(load_raster_dir(data / "rasters"))
    ids, cent, county = _population(data)
    keep, patches = [], []
    for bid, (lon, lat) in zip(ids, cent):
        r = index.find(lon, lat)
        if r is None:
            continue
        try:
            patches.append(extract_patch(r, lon, lat).pixels)
        except OutOfBounds:
            continue
        keep.append(bid)
    return keep, np.stack(patches) if patches else np.zeros((0, 128, 128, 3), np.uint8), county


def cmd_predict(cfg, args, out: Path) -> dict:
    from .classifier import predict, write_predictions

    ck = _load_ckpt(args.checkpoint, {"classifier"})
    ids, x, _ = population_patches(_data_dir(cfg))
    probs = predict(ck, x)
    write_predictions(out / "predictions.csv", ids, probs)
    return {"n_predicted": len(ids)}


def _read_predictions(path) -> dict[str, tuple[float, float, int]]:
    p = Path(_require(path, "--predictions"))
    if not p.exists():
        raise ValidationError(f"predictions file {p} not found")
    out = {}
    with open(p, newline="") as fh:
        for n, row in enumerate(csv.DictReader(fh), start=2):
            try:
                out[row["building_id"]] = (float(row["p_low"]), float(row["p_high"]), int(row["pred_class"] == "High"))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{p}, line {n}: bad prediction row ({exc})") from None
    return out


def _read_labels(path) -> dict[str, int]:
    out = {}
    if not Path(path).exists():
        raise ValidationError(f"labels file {path} not found")
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if "label" not in row or "building_id" not in row:
                raise ValidationError(f"{path}: expected columns building_id,label")
            lab = row["label"]
            if lab not in ("Low", "High"):
                raise ValidationError(f"label must be Low or High, got {lab!r}")
            out[row["building_id"]] = int(lab == "High")
    return out


def cmd_eval(cfg, args, out: Path) -> dict:
    from .evaluation import evaluate, write_reports

    preds = _read_predictions(args.predictions)
    if args.labels:
        labels = _read_labels(args.labels)
    else:
        sp = _split(cfg, _samples(cfg))
        pool = sp.test if args.split == "test" else sp.train + sp.val + sp.test
        labels = {s.building_id: s.y for s in pool}
    ids = sorted(set(preds) & set(labels))
    if not ids:
        raise ValidationError("no building ids shared by predictions and labels")
    y = np.array([labels[i] for i in ids])
    rep = evaluate(y, [preds[i][1] for i in ids], [preds[i][2] for i in ids])
    write_reports(out, {"predictions": rep})
    return {"macro_f1": rep.macro_f1, "n": len(ids)}


def cmd_hard_set(cfg, args, out: Path) -> dict:
    from .classifier import predict
    from .evaluation import evaluate, evaluate_hard_set, write_reports
    from .pipeline import stack_patches

    ck = _load_ckpt(args.checkpoint, {"classifier"})
    ss = _samples(cfg)
    sp = _split(cfg, ss)
    xe, ye = _arrays(sp.test)
    main = evaluate(ye, predict(ck, xe)[:, 1])
    if ss.mid:
        hard = evaluate_hard_set(predict(ck, stack_patches(ss.mid))[:, 1], [s.kwh for s in ss.mid])
    else:
        hard = evaluate_hard_set([], [])
    write_reports(out, {"main test set": main, "hard set (31-59 kWh)": hard})
    return {"main_f1": main.macro_f1, "hard_f1": hard.macro_f1, "decline": main.macro_f1 - hard.macro_f1}


def cmd_gradcam(cfg, args, out: Path) -> dict:
    from .classifier import predict
    from .evaluation import grad_cam, heatmap_contrast, write_heatmap
    from .pipeline import Standardizer, normalize

    ck = _load_ckpt(args.checkpoint, {"classifier"})
    sp = _split(cfg, _samples(cfg))
    xe, ye = _arrays(sp.test)
    probs = predict(ck, xe)
    stats = Standardizer.from_dict(ck.meta["image_stats"])
    chosen = [i for i in range(len(ye)) if ye[i] == 1 and probs[i, 1] > probs[i, 0]
              and sp.test[i].footprint_mask is not None][: int(cfg["gradcam"]["n_samples"])]
    rows = []
    for i in chosen:
        heat = grad_cam(ck.spec, ck.store, normalize(xe[i], stats), 1)
        inside, outside = heatmap_contrast(heat, sp.test[i].footprint_mask)
        bid = sp.test[i].building_id
        write_heatmap(out / "heatmaps" / bid, heat, xe[i])
        rows.append({"building_id": bid, "inside_mean": inside, "outside_mean": outside,
                     "min": float(heat.min()), "max": float(heat.max())})
    frac = float(np.mean([r["inside_mean"] > r["outside_mean"] for r in rows])) if rows else float("nan")
    _write_json(out / "gradcam.json", {"samples": rows, "fraction_inside_gt_outside": frac})
    return {"n_heatmaps": len(rows), "fraction_inside_gt_outside": frac}


def cmd_low_data(cfg, args, out: Path) -> dict:
    from .classifier import INITS, low_data_curve

    sp = _split(cfg, _samples(cfg))
    (xt, yt), (xv, yv), (xe, ye) = _arrays(sp.train), _arrays(sp.val), _arrays(sp.test)
    inits = INITS if args.checkpoint else ("random",)
    seg = _load_ckpt(args.checkpoint, {"segmenter"}) if args.checkpoint else None
    tc = train_config(cfg, "classifier", min_steps=int(cfg["low_data"]["min_steps"]))
    pts = low_data_curve(xt, yt, xv, yv, xe, ye, tc, cfg["low_data"]["fractions"], inits, seg, encoder_config(cfg))
    with open(out / "low_data.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["fraction", "init", "n_train", "val_f1", "test_f1", "test_auc", "best_epoch"])
        for p in pts:
            wr.writerow([p.fraction, p.init, p.n_train, f"{p.val_f1:.6f}", f"{p.test_f1:.6f}",
                         "" if p.test_auc is None else f"{p.test_auc:.6f}", p.best_epoch])
    return {"n_points": len(pts)}


def cmd_validate_mtf(cfg, args, out: Path) -> dict:
    from .evaluation import county_validation
    from .pipeline.loaders import load_survey

    data = _data_dir(cfg)
    preds = _read_predictions(args.predictions)
    _, _, county = _population(data)
    by_county: dict[str, list[int]] = {}
    for bid, (_, _, cls) in sorted(preds.items()):
        if bid in county:
            by_county.setdefault(county[bid], []).append(cls)
    survey = load_survey(data / "survey.csv")
    vc = cfg["validation"]
    seed = int(cfg["seed"])
    allc = county_validation(by_county, survey, vc["min_samples"], (), vc["n_perm"], seed)
    result = {"all": allc.to_dict()}
    summary = {"r_all": allc.r, "p_all": allc.p}
    exclude = list(args.exclude.split(",")) if args.exclude else list(vc["exclude"])
    if exclude:
        exc = county_validation(by_county, survey, vc["min_samples"], exclude, vc["n_perm"], seed)
        result["excluding"] = exc.to_dict()
        summary.update(r_excluding=exc.r, p_excluding=exc.p)
    _write_json(out / "county_validation.json", result)
    lines = ["| counties | n | weighted r | permutation p |", "|---|---|---|---|"]
    lines.append(f"| all | {allc.n_counties} | {allc.r:.3f} | {allc.p:.4f} |")
    if exclude:
        lines.append(f"| excluding {','.join(exclude)} | {exc.n_counties} | {exc.r:.3f} | {exc.p:.4f} |")
    (out / "county_validation.md").write_text("\n".join(lines) + "\n")
    return summary


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic world"),
    "pretrain-seg": (cmd_pretrain_seg, "pretrain the building segmenter"),
    "tune-pointer": (cmd_tune_pointer, "train or finetune the point-conditioned segmenter"),
    "train-clf": (cmd_train_clf, "train the image classifier (or the fusion model with --features)"),
    "train-mlp": (cmd_train_mlp, "train a tabular or roof-feature MLP baseline"),
    "baseline-a": (cmd_baseline_a, "historical constituency-average baseline"),
    "predict": (cmd_predict, "predict tiers for every footprint in a data set"),
    "eval": (cmd_eval, "score a predictions CSV"),
    "hard-set": (cmd_hard_set, "evaluate on the 31-59 kWh band at threshold 30"),
    "gradcam": (cmd_gradcam, "class activation heatmaps for correctly predicted High samples"),
    "low-data": (cmd_low_data, "macro F1 against training-set fraction, random vs pretrained init"),
    "validate-mtf": (cmd_validate_mtf, "county-level correlation with survey High shares"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--profile", choices=PROFILES, help="default hyperparameter profile (default: paper)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--threads", type=int, help="BLAS threads; 1 gives bit-exact sequential results")
    common.add_argument("--out", metavar="DIR", help="output directory (default: $DEMANDSCOPE_OUT)")
    common.add_argument("--data", metavar="DIR", help="data directory written by 'synth' or in the same layout")
    common.add_argument("--level", choices=LEVELS, help="synthetic world difficulty")
    common.add_argument("--init", choices=("random", "seg"), help="classifier encoder initialization")
    common.add_argument("--features", metavar="SET", help=f"feature set: {FEATURE_CHOICES}")
    common.add_argument("--checkpoint", metavar="PATH", help="input checkpoint")
    common.add_argument("--predictions", metavar="PATH", help="predictions CSV")
    common.add_argument("--labels", metavar="PATH", help="labels CSV (building_id,label) for 'eval'")
    common.add_argument("--split", choices=("test", "all"), default="test", help="labeled pool used by 'eval'")
    common.add_argument("--exclude", metavar="IDS", help="comma-separated county ids left out of validation")
    common.add_argument("--counties", type=int, help="number of counties for 'synth'")

    parser = argparse.ArgumentParser(prog="demandscope", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _overrides(args) -> dict:
    over: dict = {}
    if args.profile:
        over["profile"] = args.profile
    if args.seed is not None:
        over["seed"] = args.seed
    if args.threads is not None:
        over["threads"] = args.threads
    if args.out:
        over["out_dir"] = args.out
    if args.data:
        over["data_dir"] = args.data
    if args.level:
        over["world"] = {"level": args.level}
    return over


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config, _overrides(args))
        out_dir = cfg["out_dir"] or os.environ.get("DEMANDSCOPE_OUT")
        if not out_dir:
            raise ValidationError("no output directory: pass --out or set DEMANDSCOPE_OUT")
        cfg["out_dir"] = out_dir
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fn = COMMANDS[args.command][0]
        if cfg["threads"] is not None:
            if cfg["threads"] < 1:
                raise ValidationError("--threads must be at least 1")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=int(cfg["threads"])):
                summary = fn(cfg, args, out)
        else:
            summary = fn(cfg, args, out)
    except ValidationError as exc:
        print(f"demandscope {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DemandScopeError, FloatingPointError, OSError, MemoryError) as exc:
        print(f"demandscope {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    from .nn import kernels

    _write_json(out / "run.json", {
        "command": args.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "config": cfg,
        "seed": cfg["seed"],
        "version": __version__,
        "kernels": kernels.BACKEND,
        "git_describe": _git_describe(),
        "started_at": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        "wall_time_s": round(time.time() - started, 3),
        "summary": summary,
    })
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
