"""Command-line entry point: generate, composite, manifest, split, mix,
validate, evaluate, report.

Contract: machine-readable JSON summary on stdout, human progress on stderr.
Exit codes: 0 success, 1 runtime/IO failure, 2 usage or validation error.
Flag values override config-file values, which override defaults; every run
writes enough metadata to reproduce its outputs bit-exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import composite as composite_mod
from . import dataset as dataset_mod
from . import metrics as metrics_mod
from .errors import (
    InsufficientPoolError,
    MeshParseError,
    PlacementError,
    SplitError,
    SurgsynthError,
    ValidationError,
)
from .imgio import load_gray
from .render import ClipArtifacts, render_clip
from .scene import GREEN_SCREEN, SceneConfig, generate_scene

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ValidationError("resolution", f"expected WIDTHxHEIGHT, got {text!r}") from None


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError("ratios", f"expected three comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # accept a clip metadata.json for replay
    return data


def _build_scene_config(args) -> tuple[SceneConfig, list[int]]:
    overrides = _load_config_file(args.config)
    if args.frames is not None:
        overrides["duration_frames"] = args.frames
    if args.resolution is not None:
        overrides["resolution"] = list(_parse_resolution(args.resolution))
    if args.fps is not None:
        overrides["fps"] = args.fps
    if args.arms is not None:
        overrides["arm_count"] = args.arms if args.arms == "random" else int(args.arms)
    if args.background is not None:
        overrides["background"] = args.background

    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        base = args.seed if args.seed is not None else overrides.get("seed", 0)
        seeds = [int(base) + i for i in range(args.clips)]

    overrides.pop("seed", None)
    return SceneConfig(seed=seeds[0], **overrides), seeds


def cmd_generate(args) -> int:
    config, seeds = _build_scene_config(args)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    clips = []
    for seed in seeds:
        scene_config = SceneConfig.from_json({**config.to_json(), "seed": seed})
        scene = generate_scene(scene_config)
        clip_dir = out_root / f"clip_{seed:08d}"
        _log(f"rendering seed {seed} -> {clip_dir} "
             f"({scene_config.resolution[0]}x{scene_config.resolution[1]}, "
             f"{scene_config.duration_frames} frames, {len(scene.arms)} arms)")
        clip = render_clip(scene, clip_dir, workers=args.workers)
        if scene_config.background != GREEN_SCREEN:
            backgrounds = composite_mod.list_background_frames(scene_config.background)
            key = composite_mod.KeySpec(tolerance=args.tolerance)
            clip = composite_mod.composite_clip(
                clip, backgrounds, key, clip_dir, wrap=True, resize=args.resize
            )
            _log(f"composited over {scene_config.background}")
        clips.append(
            {
                "seed": seed,
                "dir": str(clip_dir),
                "frames": len(clip.frame_paths),
            }
        )

    _emit(
        {
            "command": "generate",
            "clips": clips,
            "total_frames": sum(c["frames"] for c in clips),
        }
    )
    return EXIT_OK


def cmd_composite(args) -> int:
    clip = ClipArtifacts.load(args.clip)
    backgrounds = composite_mod.list_background_frames(args.background)
    key = composite_mod.KeySpec(tolerance=args.tolerance)
    result = composite_mod.composite_clip(
        clip, backgrounds, key, args.out, wrap=args.wrap, resize=args.resize
    )
    _emit(
        {
            "command": "composite",
            "out": str(result.directory),
            "frames": len(result.frame_paths),
            "key": key.to_json(),
        }
    )
    return EXIT_OK


def _expand_clip_dirs(paths: list[str]) -> list[Path]:
    dirs = []
    for raw in paths:
        path = Path(raw)
        if not path.is_dir():
            raise ValidationError("clips", f"{path} is not a directory")
        if list(path.glob("frame_*.png")):
            dirs.append(path)
        else:
            subdirs = [d for d in sorted(path.iterdir()) if d.is_dir() and list(d.glob("frame_*.png"))]
            if not subdirs:
                raise ValidationError("clips", f"{path} holds no clip directories")
            dirs.extend(subdirs)
    return dirs


def cmd_manifest(args) -> int:
    clip_dirs = _expand_clip_dirs(args.clips)
    manifest = dataset_mod.manifest_from_clips(clip_dirs, args.origin, args.root)
    manifest.save(args.out)
    _emit(
        {
            "command": "manifest",
            "out": args.out,
            "samples": len(manifest),
            "videos": len(manifest.video_ids()),
        }
    )
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = dataset_mod.Manifest.load(args.manifest)
    ratios = _parse_ratios(args.ratios)
    train, val, test = dataset_mod.split(manifest, ratios, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = {"train": train, "val": val, "test": test}
    for name, part in names.items():
        part.save(out_dir / f"{name}.jsonl")
    _emit(
        {
            "command": "split",
            "out_dir": str(out_dir),
            "counts": {name: len(part) for name, part in names.items()},
            "videos": {name: sorted(part.video_ids()) for name, part in names.items()},
        }
    )
    return EXIT_OK


def cmd_mix(args) -> int:
    real = dataset_mod.Manifest.load(args.real)
    synth = dataset_mod.Manifest.load(args.synth)
    mixed = dataset_mod.mix(real, synth, args.alpha, args.seed)
    mixed.save(args.out)
    n_real = len(real)
    n_synt = len(mixed) - n_real
    _emit(
        {
            "command": "mix",
            "out": args.out,
            "alpha": args.alpha,
            "n_real": n_real,
            "n_synt": n_synt,
            "n_tot": len(mixed),
            "achieved_alpha": n_synt / len(mixed) if len(mixed) else 0.0,
        }
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    manifest = dataset_mod.Manifest.load(args.manifest)
    report = dataset_mod.validate_manifest(manifest, args.root)
    _emit({"command": "validate", **report.to_json()})
    return EXIT_OK if report.ok else EXIT_RUNTIME


def cmd_evaluate(args) -> int:
    pred = dataset_mod.Manifest.load(args.pred)
    gt = dataset_mod.Manifest.load(args.gt)
    pred_root = Path(args.pred_root if args.pred_root else args.root)
    gt_root = Path(args.gt_root if args.gt_root else args.root)

    gt_by_key = {(s.video_id, s.frame_index): s for s in gt.samples}
    results = []
    iou_sum = 0.0
    dice_sum = 0.0
    for sample in pred.samples:
        key = (sample.video_id, sample.frame_index)
        if key not in gt_by_key:
            raise ValidationError(
                "pairing", f"prediction {key} has no ground-truth counterpart"
            )
        pred_mask = load_gray(pred_root / sample.mask)
        gt_mask = load_gray(gt_root / gt_by_key[key].mask)
        iou_result = metrics_mod.iou(pred_mask, gt_mask)
        dice_result = metrics_mod.dice(pred_mask, gt_mask)
        iou_sum += iou_result.value
        dice_sum += dice_result.value
        results.append(
            {
                "video_id": sample.video_id,
                "frame_index": sample.frame_index,
                "iou": iou_result.value,
                "dice": dice_result.value,
            }
        )
    if not results:
        raise ValidationError("pred", "prediction manifest is empty")

    skipped = len(gt_by_key) - len(results)
    if skipped > 0:
        _log(f"note: {skipped} ground-truth samples had no prediction and were ignored")

    _emit(
        {
            "command": "evaluate",
            "n": len(results),
            "mean_iou": iou_sum / len(results),
            "mean_dice": dice_sum / len(results),
            "samples": results,
        }
    )
    return EXIT_OK


def cmd_report(args) -> int:
    records = metrics_mod.read_sweep_csv(args.sweep)
    summaries = metrics_mod.aggregate(records)
    metrics_mod.write_aggregate_csv(args.out, summaries)
    _emit(
        {
            "command": "report",
            "out": args.out,
            "groups": [
                {
                    "alpha": s.alpha,
                    "mean": s.mean,
                    "ci_low": s.ci_low,
                    "ci_high": s.ci_high,
                    "n": s.n,
                }
                for s in summaries
            ],
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgsynth",
        description="Synthetic surgical-instrument clip generation and dataset tooling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render one or more seeded clips")
    p.add_argument("--config", help="scene config JSON (or a clip metadata.json)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--seeds", help="comma-separated explicit seed list")
    p.add_argument("--clips", type=int, default=1, help="number of clips from the base seed")
    p.add_argument("--frames", type=int, help="frames per clip")
    p.add_argument("--resolution", help="WIDTHxHEIGHT, e.g. 320x180")
    p.add_argument("--fps", type=float)
    p.add_argument("--arms", help="arm count 1-3 or 'random'")
    p.add_argument("--background", help="'green_screen' or a background frame directory")
    p.add_argument("--tolerance", type=int, default=0, help="chroma tolerance when compositing")
    p.add_argument("--resize", action="store_true", help="rescale backgrounds to frame size")
    p.add_argument("--workers", type=int, default=1, help="parallel frame rendering processes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("composite", help="chroma-key a clip over background frames")
    p.add_argument("--clip", required=True, help="rendered clip directory")
    p.add_argument("--background", required=True, help="background frame directory")
    p.add_argument("--tolerance", type=int, default=0)
    p.add_argument("--wrap", action="store_true", help="reuse backgrounds modulo their count")
    p.add_argument("--resize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("manifest", help="build a JSON-lines manifest from clip dirs")
    p.add_argument("clips", nargs="+", help="clip directories (or parents of clip dirs)")
    p.add_argument("--origin", choices=("real", "synthetic"), required=True)
    p.add_argument("--root", required=True, help="dataset root paths are stored relative to")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("split", help="leakage-safe train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("mix", help="mix real + synthetic at ratio alpha")
    p.add_argument("--real", required=True, help="real training manifest")
    p.add_argument("--synth", required=True, help="synthetic pool manifest")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("validate", help="check manifest files, dimensions, binarity")
    p.add_argument("--manifest", required=True)
    p.add_argument("--root", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="IoU/Dice of predictions vs ground truth")
    p.add_argument("--pred", required=True, help="prediction manifest")
    p.add_argument("--gt", required=True, help="ground-truth manifest")
    p.add_argument("--root", default=".", help="root for both manifests")
    p.add_argument("--pred-root", help="override root for predictions")
    p.add_argument("--gt-root", help="override root for ground truth")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate a sweep CSV into per-alpha stats")
    p.add_argument("--sweep", required=True, help="CSV with header alpha,backbone,seed,iou")
    p.add_argument("--out", required=True, help="aggregate CSV path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (SplitError, InsufficientPoolError, PlacementError, MeshParseError) as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME
    except SurgsynthError as exc:
        _log(f"error: {exc}")
        return EXIT_RUNTIME
    except OSError as exc:
        _log(f"io error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
