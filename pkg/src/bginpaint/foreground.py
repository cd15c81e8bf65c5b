"""Foreground extraction: thresholded background difference cleaned by
morphological opening then closing.

Border policy for the set-definition morphology: pixels outside the
image count as background for erosion and contribute nothing to
dilation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import to_luma
from .errors import DimensionMismatch


@dataclass(frozen=True)
class StructuringElement:
    cells: np.ndarray  # bool kernel grid
    origin: tuple[int, int]

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=bool)
        object.__setattr__(self, "cells", cells)
        if not cells.any():
            raise ValueError("structuring element has no active cell")
        r, c = self.origin
        if not (0 <= r < cells.shape[0] and 0 <= c < cells.shape[1]):
            raise ValueError(f"origin {self.origin} outside kernel {cells.shape}")

    @staticmethod
    def square(side: int) -> "StructuringElement":
        return StructuringElement(np.ones((side, side), dtype=bool), (side // 2, side // 2))

    @staticmethod
    def disk(diameter: int) -> "StructuringElement":
        radius = (diameter - 1) / 2.0
        ys, xs = np.mgrid[:diameter, :diameter]
        cells = (ys - radius) ** 2 + (xs - radius) ** 2 <= radius**2 + 1e-9
        return StructuringElement(cells, (diameter // 2, diameter // 2))

    def offsets(self) -> list[tuple[int, int]]:
        rs, cs = np.nonzero(self.cells)
        return [(int(r - self.origin[0]), int(c - self.origin[1])) for r, c in zip(rs, cs)]


@dataclass(frozen=True)
class ForegroundConfig:
    tau: float = 30.0  # gray levels
    se_open: StructuringElement = field(default_factory=lambda: StructuringElement.square(3))
    se_close: StructuringElement = field(default_factory=lambda: StructuringElement.disk(7))
    use_otsu: bool = False
    repeats: int = 1  # opening/closing passes


def _shift(mask: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """out[r, c] = mask[r - dr, c - dc], zero-filled."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    rs_src = slice(max(0, -dr), min(h, h - dr))
    cs_src = slice(max(0, -dc), min(w, w - dc))
    rs_dst = slice(max(0, dr), min(h, h + dr))
    cs_dst = slice(max(0, dc), min(w, w + dc))
    out[rs_dst, cs_dst] = mask[rs_src, cs_src]
    return out


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    m = np.asarray(mask) > 0
    out = np.ones_like(m)
    for dr, dc in se.offsets():
        out &= _shift(m, -dr, -dc)
    return out.astype(np.uint8)


def dilate(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    m = np.asarray(mask) > 0
    out = np.zeros_like(m)
    for dr, dc in se.offsets():
        out |= _shift(m, dr, dc)
    return out.astype(np.uint8)


def morph_open(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Erosion followed by dilation with the same element."""
    return dilate(erode(mask, se), se)


def morph_close(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Dilation followed by erosion with the same element."""
    return erode(dilate(mask, se), se)


def otsu_threshold(diff: np.ndarray) -> float:
    """Otsu's threshold on a 0-255 gray-level difference image."""
    hist, _ = np.histogram(np.clip(diff, 0, 255), bins=256, range=(0, 256))
    hist = hist.astype(np.float64)
    total = hist.sum()
    if total == 0:
        return 0.0
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    mu0 = np.cumsum(hist * levels)
    mu_total = mu0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        m0 = mu0 / w0
        m1 = (mu_total - mu0) / w1
        between = w0 * w1 * (m0 - m1) ** 2
    between = np.nan_to_num(between)
    return float(np.argmax(between))


def difference_mask(background: np.ndarray, frame: np.ndarray, tau: float) -> np.ndarray:
    """1 where the luma difference exceeds tau gray levels."""
    if background.shape != frame.shape:
        raise DimensionMismatch(f"background {background.shape} vs frame {frame.shape}")
    diff = np.abs(to_luma(background) - to_luma(frame)) * 255.0
    return (diff > tau).astype(np.uint8)


def detect_foreground(
    background: np.ndarray, frame: np.ndarray, cfg: ForegroundConfig = ForegroundConfig()
) -> np.ndarray:
    """Binarized difference cleaned by opening then closing."""
    tau = cfg.tau
    if cfg.use_otsu:
        diff = np.abs(to_luma(background) - to_luma(frame)) * 255.0
        tau = otsu_threshold(diff)
    mask = difference_mask(background, frame, tau)
    for _ in range(cfg.repeats):
        mask = morph_open(mask, cfg.se_open)
        mask = morph_close(mask, cfg.se_close)
    return mask
