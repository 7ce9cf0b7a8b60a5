"""``freemask`` command-line entry point.

Exit status: 0 on success, 2 for usage or configuration errors, 1 when a
module rejects its inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io, theory
from .attention import fuse_resolutions, select_threshold, upsample_to
from .compositor import (
    ForegroundAsset,
    Scene,
    harmonize_luminance,
    lighting_diff,
    place,
    placed_layers,
    size_ratio,
)
from .config import ConfigError, RunConfig
from .curation import PoolGenerator, Sample, curate, retention_sweep
from .grid import mask_iou
from .placement import (
    PlacementParams,
    balance_weights,
    features,
    heatmap_loss,
    optimize_placement,
    plausibility,
    render_heatmap,
    semantic_loss,
    spatial_loss,
    total_loss,
)
from .report import render_file
from .rng import SplitMix64
from .thesaurus import build_table, compatible_objects, ingest_corpus, write_table_csv

DEFAULT_TRIPLES = ((0.8, 0.1, 0.3), (0.6, 0.2, 0.5), (0.9, 0.05, 0.2), (0.7, 0.3, 0.4), (0.95, 0.15, 0.1))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _terms(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _placement(text: str) -> PlacementParams:
    vals = _floats(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("placement must be cx,cy,w,h")
    return PlacementParams(*vals)


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="freemask", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("extract", parents=[common], help="attention map -> mask via threshold selection")
    p.add_argument("--attention", action="append", required=True, help="FMGRID01 file, CSV file or CSV directory; repeat to fuse resolutions")
    p.add_argument("--token", type=int, default=0)
    p.add_argument("--reference", required=True, help="reference mask PGM")
    p.add_argument("--taus", type=_floats, help="comma-separated threshold grid")
    p.add_argument("--out", required=True, help="output mask PGM")
    p.add_argument("--record", help="optional JSON with the selected threshold and IoU")

    p = sub.add_parser("thesaurus", parents=[common], help="build the object/background relation table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--objects", type=_terms, required=True)
    p.add_argument("--backgrounds", type=_terms, required=True)
    p.add_argument("--out", required=True, help="CSV table")
    p.add_argument("--compatible", help="background whose admissible objects are written alongside the table")
    p.add_argument("--min-relation", type=float, default=0.05)

    p = sub.add_parser("place", parents=[common], help="optimize a foreground placement")
    p.add_argument("--background", required=True)
    p.add_argument("--asset", required=True)
    p.add_argument("--asset-mask", required=True)
    p.add_argument("--reference", type=_placement, required=True, help="reference placement cx,cy,w,h")
    p.add_argument("--balance", action="store_true", help="balance outer weights by gradient norms")
    p.add_argument("--paper-literal", action="store_true", default=None)
    p.add_argument("--out", required=True, help="JSON placement record")

    p = sub.add_parser("compose", parents=[common], help="paste an asset into a scene")
    p.add_argument("--background", required=True)
    p.add_argument("--labels", help="scene label PGM (default: all background)")
    p.add_argument("--asset", required=True)
    p.add_argument("--asset-mask", required=True)
    p.add_argument("--class-id", type=int, required=True)
    p.add_argument("--placement", required=True, help="placement JSON (cx, cy, w, h or a place record)")
    p.add_argument("--harmonize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--out-image", required=True)
    p.add_argument("--out-labels", required=True)

    p = sub.add_parser("curate", parents=[common], help="iterative sample curation")
    p.add_argument("--data-dir", help="paired NAME.png / NAME.pgm samples; synthetic generator when omitted")
    p.add_argument("--batch", type=int, help="samples drawn per round")
    p.add_argument("--iters", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--accumulate", type=_bool)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sweep", parents=[common], help="retention-ratio sweep")
    p.add_argument("--ratios", type=_floats, default=[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    p.add_argument("--iterations", type=_ints, default=[30, 40, 50])
    p.add_argument("--held-out", type=int, default=200, help="clean held-out samples")
    p.add_argument("--accumulate", type=_bool)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify-theory", parents=[common], help="Monte Carlo check of the IoU closed form")
    p.add_argument("--triples", help="semicolon-separated alpha,beta,p triples")
    p.add_argument("--n-pixels", type=int, default=1_000_000)
    p.add_argument("--out", required=True)
    p.add_argument("--discrepancy", help="optional CSV comparing p->0 limits")

    p = sub.add_parser("report", parents=[common], help="render CSV/JSON outputs as SVG line charts")
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--x")
    p.add_argument("--y", action="append")
    p.add_argument("--group")
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_extract(args, cfg: RunConfig) -> None:
    maps = [io.read_attention(p) for p in args.attention]
    fused = fuse_resolutions(maps)
    reference = io.read_mask(args.reference)
    if fused.shape[:2] != reference.shape:
        fused = upsample_to(fused, *reference.shape)
    if not 0 <= args.token < fused.token_count:
        raise ValueError(f"token {args.token} out of range for {fused.token_count} tokens")
    taus = args.taus if args.taus is not None else cfg.tau_grid
    tau, mask, iou = select_threshold(fused.token(args.token), reference, taus)
    io.write_mask(args.out, mask)
    if args.record:
        _dump_json(args.record, {"tau_star": tau, "iou": iou, "token": args.token, "tau_grid": sorted(taus)})


def cmd_thesaurus(args, cfg: RunConfig) -> None:
    with open(args.corpus, "rb") as fh:
        corpus = ingest_corpus(fh)
    table = build_table(corpus, args.objects, args.backgrounds)
    write_table_csv(args.out, table)
    if args.compatible:
        ranked = compatible_objects(table, args.compatible, args.min_relation)
        _dump_json(Path(args.out).with_suffix(".compatible.json"), {"background": args.compatible, "objects": ranked})


def _load_asset(image_path, mask_path, class_id=1) -> ForegroundAsset:
    return ForegroundAsset(io.read_image(image_path), io.read_mask(mask_path), class_id)


def cmd_place(args, cfg: RunConfig) -> None:
    background = io.read_image(args.background)
    scene = Scene.blank(background)
    asset = _load_asset(args.asset, args.asset_mask)
    ref = args.reference
    weights = cfg.weights()
    mode = "paper-literal" if args.paper_literal else cfg.spatial_mode
    rows, cols = scene.shape
    bg_feats = features(background)
    ref_heat = render_heatmap(ref, rows, cols)

    def composite(p):
        mask, rgb = placed_layers(asset, p, scene.shape)
        img = background.copy()
        img[mask] = rgb[mask]
        return img, mask

    def l_spatial(p):
        return spatial_loss(p, ref, weights, mode)

    def l_semantic(p):
        try:
            img, _ = composite(p)
        except ValueError:
            return float("inf")
        return semantic_loss(bg_feats, features(img))

    def l_heatmap(p):
        return heatmap_loss(render_heatmap(p, rows, cols), ref_heat)

    if args.balance:
        start = PlacementParams(0.5, 0.5, 0.3, 0.3)
        # The composite is rasterized, so differences need at least a one-pixel step.
        h = 1.0 / min(rows, cols)
        weights = weights.with_outer(balance_weights([l_spatial, l_semantic, l_heatmap], start, h=h))

    def objective(p):
        return total_loss((l_spatial(p), l_semantic(p), l_heatmap(p)), weights)

    best = optimize_placement(objective, cfg.grid(), cfg.refine_steps)
    comps = (l_spatial(best), l_semantic(best), l_heatmap(best))
    gt_mask, _ = placed_layers(asset, ref, scene.shape)
    best_mask, _ = placed_layers(asset, best, scene.shape)
    iou_gt = mask_iou(best_mask, gt_mask)
    sr = size_ratio(asset, best, scene, cfg.target_fraction)
    ld = lighting_diff(asset, scene)
    record = {
        "p_star": {"cx": best.cx, "cy": best.cy, "w": best.w, "h": best.h},
        "losses": {"spatial": comps[0], "semantic": comps[1], "heatmap": comps[2], "total": total_loss(comps, weights)},
        "plausibility": {"value": plausibility(iou_gt, sr, ld), "iou_with_gt": iou_gt, "size_ratio": sr, "lighting_diff": ld},
        "weights": {
            "lambda_iou": weights.lambda_iou,
            "lambda_center": weights.lambda_center,
            "lambda_ar": weights.lambda_ar,
            "lambda1": weights.lambda1,
            "lambda2": weights.lambda2,
            "lambda3": weights.lambda3,
        },
        "spatial_mode": mode,
    }
    _dump_json(args.out, record)


def _read_placement(path) -> PlacementParams:
    data = json.loads(Path(path).read_text())
    if "p_star" in data:
        data = data["p_star"]
    return PlacementParams(data["cx"], data["cy"], data["w"], data["h"])


def cmd_compose(args, cfg: RunConfig) -> None:
    background = io.read_image(args.background)
    labels = io.read_labels(args.labels) if args.labels else np.zeros(background.shape[:2], dtype=np.uint8)
    scene = Scene(background, labels)
    asset = _load_asset(args.asset, args.asset_mask, args.class_id)
    harmonize = cfg.harmonize if args.harmonize is None else args.harmonize
    if harmonize:
        asset, flagged = harmonize_luminance(asset, scene)
        if flagged:
            print("warning: zero mean luminance, harmonization skipped", file=sys.stderr)
    out = place(scene, asset, _read_placement(args.placement))
    io.write_image(args.out_image, out.image)
    io.write_labels(args.out_labels, out.labels)


def load_sample_dir(directory) -> list[Sample]:
    samples = []
    for png in sorted(Path(directory).glob("*.png")):
        pgm = png.with_suffix(".pgm")
        if not pgm.exists():
            raise ValueError(f"{png.name} has no paired label file {pgm.name}")
        samples.append(Sample(io.read_image(png), io.read_labels(pgm), provenance=png.stem))
    if not samples:
        raise ValueError(f"no PNG/PGM sample pairs in {directory}")
    return samples


def cmd_curate(args, cfg: RunConfig) -> None:
    if args.data_dir:
        generator = PoolGenerator(load_sample_dir(args.data_dir), args.batch or 10)
    else:
        generator = cfg.synthetic_generator(**({"batch": args.batch} if args.batch else {}))
    result = curate(generator, cfg.iterations, cfg.alpha, cfg.seed, cfg.accumulate)
    out = Path(args.out_dir)
    (out / "dataset").mkdir(parents=True, exist_ok=True)
    (out / "history.json").write_text(result.history_json())
    for i, s in enumerate(result.dataset):
        io.write_image(out / "dataset" / f"{i:05d}.png", s.image)
        io.write_labels(out / "dataset" / f"{i:05d}.pgm", s.label)


def cmd_sweep(args, cfg: RunConfig) -> None:
    gen = cfg.synthetic_generator()
    held_gen = cfg.synthetic_generator(corruption=0.0, batch=args.held_out)
    held_out = held_gen(SplitMix64(cfg.seed).spawn())
    rows = retention_sweep(gen, args.ratios, args.iterations, cfg.seed, held_out, cfg.accumulate)
    theory.write_csv(args.out, rows, ["ratio", "iterations", "held_out_accuracy"])


def cmd_verify_theory(args, cfg: RunConfig) -> None:
    if args.triples:
        triples = [tuple(_floats(t)) for t in args.triples.split(";") if t.strip()]
        if any(len(t) != 3 for t in triples):
            raise ConfigError("each triple must be alpha,beta,p")
    else:
        triples = list(DEFAULT_TRIPLES)
    rows = theory.verification_rows(triples, args.n_pixels, cfg.seed)
    theory.write_csv(args.out, rows, theory.CSV_COLUMNS)
    if args.discrepancy:
        rep = theory.discrepancy_report((a, b) for a, b, _ in triples)
        theory.write_csv(args.discrepancy, rep, ["alpha", "beta", "analytic_limit_p0", "paper_claimed_limit"])


def cmd_report(args, cfg: RunConfig) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in args.input:
        svg = render_file(path, args.x, args.y, args.group)
        (out / (Path(path).stem + ".svg")).write_text(svg)


COMMANDS = {
    "extract": cmd_extract,
    "thesaurus": cmd_thesaurus,
    "place": cmd_place,
    "compose": cmd_compose,
    "curate": cmd_curate,
    "sweep": cmd_sweep,
    "verify-theory": cmd_verify_theory,
    "report": cmd_report,
}


def _overrides(args) -> dict:
    ov = {"seed": args.seed}
    for flag, key in (("iters", "iterations"), ("alpha", "alpha"), ("accumulate", "accumulate")):
        if hasattr(args, flag):
            ov[key] = getattr(args, flag)
    if getattr(args, "paper_literal", None):
        ov["paper_literal"] = True
    inputs = {}
    for name in ("corpus", "background", "labels", "asset", "asset_mask", "reference", "placement", "data_dir"):
        v = getattr(args, name, None)
        if isinstance(v, str):
            inputs[name] = v
    for v in getattr(args, "attention", None) or []:
        inputs[f"attention:{v}"] = v
    for v in getattr(args, "input", None) or []:
        inputs[f"input:{v}"] = v
    ov["inputs"] = inputs
    return ov


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"freemask {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"freemask {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError, OSError, UnicodeDecodeError) as exc:
        print(f"freemask {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
