"""Frame/ground-truth ingestion and image/report output.

Image convention used throughout the package: numpy float64 arrays of
shape (H, W) for grayscale or (H, W, 3) for color, values in [0, 1].
Files are 8-bit at the boundary (PNG/JPEG in, PNG out).

Dataset layout: ``<root>/<category>/<video>/input/in%06d.jpg`` for
frames, ``<root>/<category>/<video>/GT/`` holding either a single
background image or ``gt%06d.png`` per-frame masks.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import (
    DecodeFailure,
    DimensionMismatch,
    IoFailure,
    KindMismatch,
    MissingFrames,
    MissingGroundTruth,
)

# Rec.601 luma, the convention of the change-detection benchmarks.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

FRAME_PATTERN = "in%06d.jpg"
FRAME_PATTERN_PNG = "in%06d.png"
MASK_PATTERN = "gt%06d.png"

KIND_BACKGROUND = "background-image"
KIND_MASKS = "per-frame-masks"

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def to_luma(img: np.ndarray) -> np.ndarray:
    """Collapse an image to a single luma channel in [0, 1]."""
    if img.ndim == 2:
        return np.asarray(img, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * img[..., 0] + g * img[..., 1] + b * img[..., 2]


def validate_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] not in (1, 3)):
        raise DimensionMismatch(f"unsupported image shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionMismatch(f"empty image {img.shape}")
    if not np.isfinite(img).all() or img.min() < 0.0 or img.max() > 1.0:
        raise DimensionMismatch("image values must be finite and in [0, 1]")
    return img


def to_u8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def from_u8(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0


def load_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit image file into the [0, 1] float convention."""
    try:
        with PILImage.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im)
    except FileNotFoundError:
        raise
    except Exception as exc:  # PIL raises a zoo of decode errors
        raise DecodeFailure(f"cannot decode {path}: {exc}") from exc
    return from_u8(arr)


def write_image(img: np.ndarray, path: str | Path) -> None:
    """Write a [0, 1] image as lossless 8-bit PNG."""
    arr = to_u8(np.asarray(img, dtype=np.float64))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a {0,1} mask as a {0,255} 8-bit PNG."""
    arr = (np.asarray(mask) > 0).astype(np.uint8) * 255
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass
class FrameSequence:
    """Ordered, same-sized video frames with their original indices."""

    name: str
    frames: list[np.ndarray]
    indices: list[int]

    def __post_init__(self) -> None:
        if len(self.frames) < 2:
            raise MissingFrames(f"sequence {self.name!r} has {len(self.frames)} frames, need >= 2")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise DimensionMismatch(
                    f"frame {self.indices[i]} has shape {f.shape}, expected {shape}"
                )
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise DimensionMismatch("frame indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple:
        return self.frames[0].shape

    @property
    def channels(self) -> int:
        return 1 if self.frames[0].ndim == 2 else self.frames[0].shape[2]


@dataclass
class GroundTruth:
    """Either a reference background image or per-frame binary masks."""

    kind: str
    background: np.ndarray | None = None
    masks: dict[int, np.ndarray] = field(default_factory=dict)


def _pattern_regex(pattern: str) -> re.Pattern:
    """Translate a printf-style template with one integer field to a regex."""
    m = re.search(r"%0?(\d*)d", pattern)
    if m is None:
        raise ValueError(f"pattern {pattern!r} lacks an integer field like %06d")
    width = m.group(1)
    digits = rf"(\d{{{width}}})" if width else r"(\d+)"
    head, tail = pattern[: m.start()], pattern[m.end() :]
    return re.compile(re.escape(head) + digits + re.escape(tail) + r"$")


def _indexed_files(directory: Path, pattern: str) -> list[tuple[int, Path]]:
    rx = _pattern_regex(pattern)
    found = []
    for p in directory.iterdir():
        m = rx.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    # sort purely by parsed index, never by enumeration order
    found.sort(key=lambda t: t[0])
    return found


def load_sequence(path: str | Path, pattern: str | None = None) -> FrameSequence:
    """Load all frames matching ``pattern`` under ``path``, sorted by index.

    With no explicit pattern, tries ``in%06d.jpg`` then ``in%06d.png``.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise MissingFrames(f"{directory} is not a directory")
    patterns = [pattern] if pattern else [FRAME_PATTERN, FRAME_PATTERN_PNG]
    matches: list[tuple[int, Path]] = []
    for pat in patterns:
        matches = _indexed_files(directory, pat)
        if len(matches) >= 2:
            break
    if len(matches) < 2:
        raise MissingFrames(
            f"{directory} holds {len(matches)} frames matching {patterns}, need >= 2"
        )
    frames = [load_image(p) for _, p in matches]
    return FrameSequence(name=directory.name, frames=frames, indices=[i for i, _ in matches])


def load_ground_truth(path: str | Path, kind: str) -> GroundTruth:
    """Load a background image or per-frame mask directory.

    Mask values binarize at 0.5; absent mask indices are simply not
    present in the returned mapping.
    """
    p = Path(path)
    if kind == KIND_BACKGROUND:
        if p.is_file():
            return GroundTruth(kind=kind, background=load_image(p))
        if not p.is_dir():
            raise MissingGroundTruth(f"{p} does not exist")
        images = sorted(q for q in p.iterdir() if q.suffix.lower() in _IMAGE_SUFFIXES)
        if not images:
            raise MissingGroundTruth(f"no image file under {p}")
        if len(images) > 1:
            raise KindMismatch(f"{p} holds {len(images)} images, expected one background")
        return GroundTruth(kind=kind, background=load_image(images[0]))
    if kind == KIND_MASKS:
        if not p.is_dir():
            raise MissingGroundTruth(f"{p} does not exist")
        matches = _indexed_files(p, MASK_PATTERN)
        if not matches:
            n_img = sum(1 for q in p.iterdir() if q.suffix.lower() in _IMAGE_SUFFIXES)
            if n_img:
                raise KindMismatch(f"{p} holds unindexed images, expected {MASK_PATTERN} masks")
            raise MissingGroundTruth(f"no {MASK_PATTERN} masks under {p}")
        masks = {i: (to_luma(load_image(q)) >= 0.5).astype(np.uint8) for i, q in matches}
        return GroundTruth(kind=kind, masks=masks)
    raise KindMismatch(f"unknown ground-truth kind {kind!r}")


def write_report(rows: list[dict], path: str | Path, columns: list[str]) -> None:
    """Write metric records as CSV with a fixed column order, floats at 4 decimals."""
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_cell(row.get(c, "")) for c in columns])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_report_json(rows: list[dict], path: str | Path) -> None:
    """JSON mirror of the CSV report, identical fields."""
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2, default=float)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
