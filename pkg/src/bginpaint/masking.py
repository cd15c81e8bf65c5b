"""Motion masks, background-frame selection, and inpainting-task geometry.

Mask convention: m = 1 marks static (background) pixels, m = 0 marks
moving (foreground) pixels. A pixel is background when its flow
magnitude is strictly below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataio import FrameSequence
from .errors import OversizedObject

# components smaller than this are treated as flow noise, not objects
MIN_COMPONENT_PIXELS = 9

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FlowThreshold:
    t_h: float
    k: float
    degenerate: bool = False


@dataclass
class InpaintTask:
    """A square patch with a centered square hole of half the patch side."""

    patch: np.ndarray
    object_mask: np.ndarray  # 1 outside the hole, 0 inside
    origin: tuple[int, int]  # patch top-left in frame coordinates (row, col)
    frame_index: int
    component: np.ndarray | None = None  # frame-sized bool mask of the source component

    @property
    def patch_size(self) -> int:
        return self.patch.shape[0]

    @property
    def hole(self) -> tuple[int, int, int]:
        return hole_box(self.patch_size)

    def masked_patch(self) -> np.ndarray:
        m = self.object_mask
        if self.patch.ndim == 3:
            m = m[:, :, None]
        return self.patch * m

    def hole_content(self) -> np.ndarray:
        r0, c0, side = self.hole
        return self.patch[r0 : r0 + side, c0 : c0 + side]


def hole_box(patch_size: int) -> tuple[int, int, int]:
    """(row0, col0, side) of the centered hole: side is half the patch side."""
    side = patch_size // 2
    off = patch_size // 4
    return off, off, side


def make_object_mask(patch_size: int) -> np.ndarray:
    mask = np.ones((patch_size, patch_size), dtype=np.float64)
    r0, c0, side = hole_box(patch_size)
    mask[r0 : r0 + side, c0 : c0 + side] = 0.0
    return mask


def compute_threshold(mag: np.ndarray, k: float = 1.0) -> FlowThreshold:
    """Threshold at k times the mean magnitude; flag near-zero fields."""
    mean = float(np.mean(mag))
    return FlowThreshold(t_h=k * mean, k=k, degenerate=mean < 1e-6)


def build_motion_mask(mag: np.ndarray, th: FlowThreshold) -> np.ndarray:
    """1 where magnitude < t_h (background), 0 otherwise (foreground)."""
    if th.degenerate:
        return np.ones(mag.shape, dtype=np.uint8)
    return (mag < th.t_h).astype(np.uint8)


def select_background_frame(seq: FrameSequence) -> int:
    """Index minimizing the forward frame-difference sum; ties go low."""
    diffs = [
        float(np.abs(seq.frames[t + 1] - seq.frames[t]).sum())
        for t in range(len(seq) - 1)
    ]
    return int(np.argmin(diffs))


def foreground_components(mask: np.ndarray, min_pixels: int = MIN_COMPONENT_PIXELS):
    """8-connected foreground components above the noise floor.

    Yields (component_id, bool mask, bounding slices) in label order.
    """
    labels, n = ndimage.label(mask == 0, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    slices = ndimage.find_objects(labels)
    out = []
    for cid in range(1, n + 1):
        if sizes[cid - 1] < min_pixels:
            continue
        out.append((cid, labels == cid, slices[cid - 1]))
    return out


def extract_inpaint_tasks(
    frame: np.ndarray,
    mask: np.ndarray,
    patch_size: int,
    min_pixels: int = MIN_COMPONENT_PIXELS,
    frame_index: int = 0,
) -> list[InpaintTask]:
    """One center-hole task per foreground component that fits in the hole.

    Patches are centered on the component centroid and shifted inward at
    frame borders so the hole stays interior. A component whose bounding
    box exceeds the hole side is an error, never silently dropped.
    """
    if patch_size % 4 != 0:
        raise ValueError(f"patch_size {patch_size} must be divisible by 4")
    h, w = mask.shape
    if patch_size > min(h, w):
        raise ValueError(f"patch_size {patch_size} exceeds frame dims {(h, w)}")
    hole_side = patch_size // 2

    tasks = []
    for cid, comp, box in foreground_components(mask, min_pixels):
        bb_h = box[0].stop - box[0].start
        bb_w = box[1].stop - box[1].start
        if bb_h > hole_side or bb_w > hole_side:
            raise OversizedObject(
                f"component {cid} bounding box {bb_h}x{bb_w} exceeds hole side {hole_side}"
            )
        cy, cx = ndimage.center_of_mass(comp)
        r0 = int(np.clip(round(cy) - patch_size // 2, 0, h - patch_size))
        c0 = int(np.clip(round(cx) - patch_size // 2, 0, w - patch_size))
        tasks.append(
            InpaintTask(
                patch=frame[r0 : r0 + patch_size, c0 : c0 + patch_size].copy(),
                object_mask=make_object_mask(patch_size),
                origin=(r0, c0),
                frame_index=frame_index,
                component=comp,
            )
        )
    return tasks


def harvest_training_patches(
    frames: list[np.ndarray],
    masks: list[np.ndarray],
    patch_size: int,
    limit: int,
    rng: np.random.Generator,
    stride: int | None = None,
) -> list[InpaintTask]:
    """Background-pure patches whose true hole content is therefore known.

    Scans a stride grid over every (frame, mask) pair and keeps patches
    where the motion mask is background everywhere, then subsamples to
    ``limit`` with the supplied rng.
    """
    if stride is None:
        stride = max(patch_size // 2, 1)
    candidates: list[tuple[int, int, int]] = []
    for t, (frame, mask) in enumerate(zip(frames, masks)):
        h, w = mask.shape
        if patch_size > min(h, w):
            continue
        rows = list(range(0, h - patch_size + 1, stride))
        cols = list(range(0, w - patch_size + 1, stride))
        if rows and rows[-1] != h - patch_size:
            rows.append(h - patch_size)
        if cols and cols[-1] != w - patch_size:
            cols.append(w - patch_size)
        for r0 in rows:
            for c0 in cols:
                if mask[r0 : r0 + patch_size, c0 : c0 + patch_size].all():
                    candidates.append((t, r0, c0))
    if len(candidates) > limit:
        picks = rng.choice(len(candidates), size=limit, replace=False)
        candidates = [candidates[i] for i in sorted(picks)]
    tasks = []
    for t, r0, c0 in candidates:
        tasks.append(
            InpaintTask(
                patch=frames[t][r0 : r0 + patch_size, c0 : c0 + patch_size].copy(),
                object_mask=make_object_mask(patch_size),
                origin=(r0, c0),
                frame_index=t,
            )
        )
    return tasks
