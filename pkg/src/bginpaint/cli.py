"""Command-line interface.

Verbs: estimate, segment, train, benchmark, metrics. Every pipeline
config field is exposed as a flag; --config points at a flat key=value
file and explicit flags override it. Exit codes: 0 success, 2 input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import dataio
from .config import PipelineConfig, build_config, load_config_file, write_manifest
from .dataio import load_image, load_sequence, write_image, write_mask
from .errors import InputError, NumericalError
from .inpaint_net import save_checkpoint
from .metrics import background_metrics
from .pipeline import (
    BACKGROUND_COLUMNS,
    BackgroundModel,
    arch_descriptor,
    estimate_background,
    motion_masks,
    run_benchmark,
    segment_video,
    train_scene_model,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline config")
    for f in dataclasses.fields(PipelineConfig):
        if f.name == "seed":  # exposed as the top-level --seed flag
            continue
        group.add_argument(
            f"--{f.name.replace('_', '-')}",
            dest=f"cfg_{f.name}",
            default=None,
            metavar="V",
            help=f"{f.name} (default {getattr(PipelineConfig(), f.name)})",
        )


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            overrides[key[4:]] = value
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    return build_config(file_values, overrides)


def _frames_dir(video_dir: Path) -> Path:
    inp = video_dir / "input"
    return inp if inp.is_dir() else video_dir


def _cmd_estimate(args) -> int:
    cfg = _config_from_args(args)
    seq = load_sequence(_frames_dir(Path(args.video_dir)))
    model = estimate_background(seq, cfg)
    out = Path(args.out)
    write_image(model.image, out / "background.png")
    write_manifest(
        cfg,
        out,
        extra={
            "selected_frame": model.frame_index,
            "tasks_inpainted": model.tasks_inpainted,
            "video": seq.name,
        },
    )
    print(f"wrote {out / 'background.png'} (frame {model.frame_index}, "
          f"{model.tasks_inpainted} regions inpainted)")
    return 0


def _cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    seq = load_sequence(_frames_dir(Path(args.video_dir)))
    background = load_image(args.background)
    model = BackgroundModel(background, -1, 0, "external")
    masks = segment_video(seq, model, cfg)
    out = Path(args.out)
    for idx, mask in zip(seq.indices, masks):
        write_mask(mask, out / (dataio.MASK_PATTERN % idx))
    write_manifest(cfg, out, extra={"video": seq.name, "frames": len(masks)})
    print(f"wrote {len(masks)} masks to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _config_from_args(args)
    seq = load_sequence(_frames_dir(Path(args.video_dir)))
    masks = motion_masks(seq, cfg)
    gen, disc, history = train_scene_model(seq, masks, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    save_checkpoint(ckpt, gen, disc, arch_descriptor(cfg, seq.channels), cfg.seed)
    write_manifest(cfg, out, extra={"video": seq.name, "steps": len(history)})
    final = history[-1]
    print(f"wrote {ckpt} ({len(history)} steps, final l_rec {final['l_rec']:.6f})")
    return 0


def _cmd_benchmark(args) -> int:
    cfg = _config_from_args(args)
    report = run_benchmark(args.root, cfg, args.mode, out_dir=args.out)
    write_manifest(cfg, args.out, extra={"mode": args.mode, "videos": len(report.rows)})
    for row in report.rows:
        print(",".join(dataio.format_cell(row[c]) for c in row))
    for fail in report.failures:
        print(f"SKIPPED {fail.category}/{fail.video}: {fail.error}", file=sys.stderr)
    return 0


def _cmd_metrics(args) -> int:
    cfg = _config_from_args(args)
    est = load_image(args.estimate)
    gt = load_image(args.truth)
    scores = background_metrics(est, gt, cfg.tau_e)
    row = {
        "video": Path(args.estimate).stem,
        "AGE": scores.age,
        "pEPs": scores.peps,
        "pCEPs": scores.pceps,
        "PSNR": scores.psnr,
        "MSSSIM": scores.msssim,
        "CQM": scores.cqm,
    }
    for col in BACKGROUND_COLUMNS[1:]:
        print(f"{col}: {row[col]:.4f}")
    if args.out:
        dataio.write_report([row], Path(args.out) / "metrics.csv", BACKGROUND_COLUMNS)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bginpaint",
        description="Background estimation by motion-masked inpainting, "
        "foreground segmentation, and benchmark evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", default=None, help="random seed (overrides config)")
        p.add_argument("--out", default="out", help="output directory")
        _add_config_flags(p)

    p = sub.add_parser("estimate", help="estimate a background image for one video")
    p.add_argument("video_dir")
    common(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("segment", help="segment foreground against a background image")
    p.add_argument("video_dir")
    p.add_argument("--background", required=True, help="estimated background PNG")
    common(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("train", help="train the scene-specific inpainting model")
    p.add_argument("video_dir")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("benchmark", help="run a dataset sweep")
    p.add_argument("root")
    p.add_argument("--mode", choices=["background", "segmentation"], required=True)
    common(p)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("metrics", help="background metrics for one image pair")
    p.add_argument("estimate")
    p.add_argument("truth")
    common(p)
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
