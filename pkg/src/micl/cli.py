"""Command-line entry point.

Subcommands: generate (synthetic dataset to JSON), run (full curriculum
over a dataset), evaluate (CorLoc, AP, and error histogram for stored
predictions), saliency-dump (per-category saliency, seeds, and grown
mask for one image as PGM files).

Settings are resolved in three layers: dataclass defaults, then a flat
key=value config file, then command-line flags. Exit codes: 0 success,
2 usage or input errors, 1 unexpected internal failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from micl import seeding
from micl.curriculum import (
    CurriculumState,
    MiclConfig,
    metrics_to_csv,
    micl_run,
    state_to_json,
)
from micl.detector import MscModel, branch_scores, pool_rois, top_detection
from micl.evaluation import (
    GroundTruthObject,
    ScoredBox,
    average_precision,
    corloc,
    error_histogram,
    mean_average_precision,
)
from micl.geometry import BoundingBox
from micl.pgm import mask_to_gray, saliency_to_gray, write_pgm
from micl.saliency import (
    aggregate_roi_saliency,
    grad_background_map,
    normalize_saliency,
)
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, SyntheticScene, dataset_from_json, dataset_to_json
from micl.detector import feature_gradients, image_feature_gradients


class UsageError(Exception):
    """Bad input or arguments; maps to exit code 2."""


@dataclasses.dataclass
class RunConfig:
    """Merged settings for all subcommands."""

    gen: GenConfig
    micl: MiclConfig
    ap_variant: str = "voc07"


def _coerce(name: str, raw: str, annotation: object) -> object:
    try:
        if annotation is int:
            return int(raw)
        if annotation is float:
            return float(raw)
        if annotation is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if annotation is str:
            return raw
        # remaining config fields are 2-tuples of int or float
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(raw)
        if "float" in str(annotation):
            return (float(parts[0]), float(parts[1]))
        return (int(parts[0]), int(parts[1]))
    except ValueError as exc:
        raise UsageError(f"config key {name}={raw!r} is not a valid value") from exc


def parse_config_file(path: Optional[str]) -> dict[str, str]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def build_run_config(raw: dict[str, str], args: argparse.Namespace) -> RunConfig:
    gen_fields = {f.name: f.type for f in dataclasses.fields(GenConfig)}
    micl_fields = {f.name: f.type for f in dataclasses.fields(MiclConfig)}
    gen_kwargs: dict[str, object] = {}
    micl_kwargs: dict[str, object] = {}
    ap_variant = "voc07"
    for key, value in raw.items():
        if key in gen_fields:
            gen_kwargs[key] = _coerce(key, value, _resolve(gen_fields[key]))
        elif key in micl_fields:
            micl_kwargs[key] = _coerce(key, value, _resolve(micl_fields[key]))
        elif key == "ap_variant":
            ap_variant = value
        else:
            raise UsageError(f"unknown config key {key!r}")
    seed = getattr(args, "seed", None)
    if seed is not None:
        gen_kwargs["rng_seed"] = seed
        micl_kwargs["rng_seed"] = seed
    if getattr(args, "max_rounds", None) is not None:
        micl_kwargs["max_rounds"] = args.max_rounds
    if getattr(args, "threshold_T", None) is not None:
        micl_kwargs["threshold_t"] = args.threshold_T
    if getattr(args, "workers", None) is not None:
        micl_kwargs["workers"] = args.workers
    if getattr(args, "ap_variant", None) is not None:
        ap_variant = args.ap_variant
    if ap_variant not in ("voc07", "area"):
        raise UsageError(f"unknown AP variant {ap_variant!r}")
    try:
        return RunConfig(
            gen=GenConfig(**gen_kwargs), micl=MiclConfig(**micl_kwargs), ap_variant=ap_variant
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _resolve(annotation: object) -> object:
    # dataclass fields carry string annotations under future-import
    # semantics; tuple annotations stay as text so _coerce can read the
    # element type out of them
    if isinstance(annotation, str):
        return {
            "int": int,
            "float": float,
            "bool": bool,
            "str": str,
        }.get(annotation, annotation)
    return annotation


def _load_dataset(path: Optional[str]) -> list[SyntheticScene]:
    if path is None:
        raise UsageError("--dataset is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"dataset file not found: {path}")
    try:
        scenes = dataset_from_json(p.read_text())
    except ValueError as exc:
        raise UsageError(f"cannot parse dataset {path}: {exc}") from exc
    if not scenes:
        raise UsageError(f"dataset {path} contains no images")
    return scenes


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args: argparse.Namespace) -> int:
    from micl.synthdata import generate_dataset

    config = build_run_config(parse_config_file(args.config), args)
    if args.out is None:
        raise UsageError("--out is required")
    scenes = generate_dataset(config.gen)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(dataset_to_json(scenes))
    print(f"wrote {len(scenes)} images to {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = build_run_config(parse_config_file(args.config), args)
    if getattr(args, "workers", None) is None and "workers" not in parse_config_file(args.config):
        config.micl.workers = max(1, os.cpu_count() or 1)
    scenes = _load_dataset(args.dataset)
    out = _out_dir(args)

    def snapshot(state: CurriculumState) -> None:
        (out / f"state_round_{state.round_index}.json").write_text(state_to_json(state))

    result = micl_run(scenes, config.micl, round_hook=snapshot)
    (out / "metrics.csv").write_text(metrics_to_csv(result.state))
    (out / "model.json").write_text(result.model.to_json())
    (out / f"state_round_{result.state.round_index}.json").write_text(
        state_to_json(result.state)
    )
    predictions = []
    cache = {
        s.image_id: pool_rois(
            np.asarray(s.features, dtype=np.float64), list(s.proposals), config.micl.pool_size
        )
        for s in scenes
    }
    for s in scenes:
        for c in s.labels:
            det = top_detection(result.model, cache[s.image_id], c)
            predictions.append(
                {
                    "image": s.image_id,
                    "c": c,
                    "box": list(det.box.as_tuple()),
                    "score": det.score,
                }
            )
    (out / "predictions.json").write_text(
        json.dumps({"predictions": predictions}, sort_keys=True, separators=(",", ":"))
        + "\n"
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    last = result.state.metrics[-1]
    print(
        f"finished round {last.round_index}: "
        f"selected {last.n_selected}/{len(result.state.records)}, "
        f"corloc_all {last.corloc_all:.1f}"
    )
    return 0


def _load_predictions(path: Optional[str]):
    if path is None:
        raise UsageError("--predictions is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"predictions file not found: {path}")
    try:
        payload = json.loads(p.read_text())
        entries = payload["predictions"]
        by_pair: dict[tuple[str, int], Optional[BoundingBox]] = {}
        scored: dict[int, list[ScoredBox]] = {}
        for e in entries:
            box = None if e["box"] is None else BoundingBox(*e["box"])
            by_pair[(str(e["image"]), int(e["c"]))] = box
            if box is not None:
                scored.setdefault(int(e["c"]), []).append(
                    ScoredBox(str(e["image"]), box, float(e.get("score", 0.0)))
                )
        return by_pair, scored
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse predictions {path}: {exc}") from exc


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = build_run_config(parse_config_file(args.config), args)
    scenes = _load_dataset(args.dataset)
    by_pair, scored = _load_predictions(args.predictions)
    gt = [obj for s in scenes for obj in s.gt]
    try:
        corloc_value = corloc(by_pair, gt)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    categories = sorted({obj.category for obj in gt})
    aps = {
        c: average_precision(scored.get(c, []), gt, c, variant=config.ap_variant)
        for c in categories
    }
    histogram = error_histogram(by_pair, gt)
    report = {
        "corloc": corloc_value,
        "ap_variant": config.ap_variant,
        "ap": {str(c): (None if math.isnan(v) else v) for c, v in aps.items()},
        "map": (lambda m: None if math.isnan(m) else m)(
            mean_average_precision(list(aps.values()))
        ),
        "errors": {e.value: n for e, n in histogram.items()},
    }
    text = json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out is not None:
        out = _out_dir(args)
        (out / "evaluation.json").write_text(text)
    print(f"corloc {corloc_value:.2f}")
    for c in categories:
        shown = "nan" if math.isnan(aps[c]) else f"{aps[c]:.4f}"
        print(f"ap[{c}] {shown}")
    m = mean_average_precision(list(aps.values()))
    print(f"map {'nan' if math.isnan(m) else f'{m:.4f}'}")
    for e, n in histogram.items():
        print(f"errors.{e.value} {n}")
    return 0


def cmd_saliency_dump(args: argparse.Namespace) -> int:
    config = build_run_config(parse_config_file(args.config), args)
    scenes = _load_dataset(args.dataset)
    if args.model is None:
        raise UsageError("--model is required")
    model_path = Path(args.model)
    if not model_path.is_file():
        raise UsageError(f"model file not found: {args.model}")
    try:
        model = MscModel.from_json(model_path.read_text())
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse model {args.model}: {exc}") from exc
    if args.image_id is None:
        raise UsageError("--image-id is required")
    matches = [s for s in scenes if s.image_id == args.image_id]
    if not matches:
        raise UsageError(f"image id {args.image_id!r} not in dataset")
    scene = matches[0]
    out = _out_dir(args)
    height, width = scene.features.shape[:2]
    pooled = pool_rois(
        np.asarray(scene.features, dtype=np.float64),
        list(scene.proposals),
        model.pool_size,
    )
    p, _h = branch_scores(model, pooled.flat)
    planes = {}
    grads = {}
    for c in scene.labels:
        roi_grads = feature_gradients(model, pooled, c)
        roi_planes = (roi_grads * pooled.pooled).sum(axis=3)
        raw = aggregate_roi_saliency(
            [(box, roi_planes[r], float(p[r, c])) for r, box in enumerate(pooled.boxes)],
            (height, width),
        )
        planes[c] = normalize_saliency(raw)
        grads[c] = image_feature_gradients(model, pooled, c, (height, width))
    background = grad_background_map(grads, scene.labels)
    object_seeds = seeding.threshold_object_seeds(planes, scene.labels, config.micl.t_obj)
    bg_seeds = seeding.adaptive_background_seeds(
        background, config.micl.t_bg, config.micl.min_bg_fraction
    )
    seeds = seeding.pool_seeds(object_seeds, bg_seeds)
    segmenter = RegionGrowSegmenter(
        RegionGrowConfig(
            similarity_tolerance=config.micl.similarity_tolerance,
            max_iterations=config.micl.grow_max_iterations,
        )
    )
    mask = segmenter.segment(np.asarray(scene.features, dtype=np.float64), seeds)
    for c in scene.labels:
        write_pgm(out / f"saliency_cat{c}.pgm", saliency_to_gray(planes[c]))
    write_pgm(out / "saliency_background.pgm", saliency_to_gray(np.clip(background, 0.0, 1.0)))
    write_pgm(out / "seeds.pgm", mask_to_gray(seeds.labels))
    write_pgm(out / "mask.pgm", mask_to_gray(mask.labels))
    print(f"wrote PGM dumps for {scene.image_id} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micl",
        description="weakly supervised localization curriculum on feature-grid datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, dataset: bool) -> None:
        p.add_argument("--config", help="flat key=value settings file")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--seed", type=int, help="rng seed override")
        if dataset:
            p.add_argument("--dataset", help="dataset JSON path")

    g = sub.add_parser("generate", help="write a synthetic dataset")
    common(g, dataset=False)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="train, localize, and select over rounds")
    common(r, dataset=True)
    r.add_argument("--max-rounds", type=int, help="retraining round budget")
    r.add_argument("--threshold-T", dest="threshold_T", type=float,
                   help="consistency threshold for selection")
    r.add_argument("--workers", type=int, help="parallel image workers")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="score stored predictions against a dataset")
    common(e, dataset=True)
    e.add_argument("--predictions", help="predictions JSON path")
    e.add_argument("--ap-variant", choices=("voc07", "area"),
                   help="11-point interpolation or exact area")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("saliency-dump", help="write saliency, seed, and mask PGMs")
    common(s, dataset=True)
    s.add_argument("--model", help="model JSON path")
    s.add_argument("--image-id", help="image to dump")
    s.set_defaults(func=cmd_saliency_dump)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001 - report and map to the internal-error code
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
