#!/usr/bin/env python3
"""Emit a benchmark-layout dataset tree of synthetic videos.

Produces <root>/<category>/<video>/input/in%06d.png frames plus GT/
holding either the true background image (--gt background) or
gt%06d.png masks (--gt segmentation), matching what
`bginpaint benchmark <root> --mode ...` expects.
"""

import argparse
from pathlib import Path

import numpy as np

from bginpaint import dataio
from bginpaint.synth import moving_square_sequence, smooth_texture


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default="out/synthetic_dataset")
    parser.add_argument("--gt", choices=["background", "segmentation"], default="background")
    parser.add_argument("--videos", type=int, default=2)
    parser.add_argument("--frames", type=int, default=30)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    root = Path(args.root)
    rng = np.random.default_rng(args.seed)
    for v in range(args.videos):
        bg = smooth_texture(160, 224, rng, channels=3, sigma=6.0, lo=0.35, hi=0.9)
        start = (int(rng.integers(40, 80)), int(rng.integers(40, 120)))
        frames, masks = moving_square_sequence(
            args.frames, bg, square=20, speed=(2, 1), start=start, margin=16, color=0.03
        )
        vdir = root / "synthetic" / f"video{v:02d}"
        for t, frame in enumerate(frames):
            dataio.write_image(frame, vdir / "input" / (dataio.FRAME_PATTERN_PNG % t))
        if args.gt == "background":
            dataio.write_image(bg, vdir / "GT" / "background.png")
        else:
            for t, mask in enumerate(masks):
                dataio.write_mask(mask, vdir / "GT" / (dataio.MASK_PATTERN % t))
        print(f"wrote {vdir} ({args.frames} frames, {args.gt} ground truth)")
    print(f"dataset at {root}")


if __name__ == "__main__":
    main()
