"""Dense motion estimation between consecutive frames.

Coarse-to-fine variational flow in the Horn-Schunck family: a Gaussian
image pyramid, one incremental solve per level with the previous level's
(upsampled) field used to warp the second frame. Works on 0-255 scaled
luma so the default smoothness weight behaves like the classical value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import convolve2d

from .dataio import to_luma
from .errors import DimensionMismatch

# weighted 8-neighborhood average from the original Horn-Schunck scheme
_AVG_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)


@dataclass(frozen=True)
class FlowParams:
    levels: int = 4
    smoothness: float = 15.0
    iterations: int = 100


@dataclass
class FlowField:
    """Per-pixel displacement in pixels/frame; u horizontal, v vertical."""

    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.u.shape


def flow_magnitude(field: FlowField) -> np.ndarray:
    """Pointwise Euclidean norm sqrt(u^2 + v^2)."""
    return np.hypot(field.u, field.v)


def magnitude_image(mag: np.ndarray) -> np.ndarray:
    """Magnitude as a [0, 1] grayscale image for debug dumps."""
    top = float(mag.max())
    if top <= 0.0:
        return np.zeros_like(mag)
    return mag / top


def _resize_bilinear(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = arr.shape
    nh, nw = shape
    rows = (np.arange(nh) + 0.5) * h / nh - 0.5
    cols = (np.arange(nw) + 0.5) * w / nw - 0.5
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(arr, grid, order=1, mode="nearest")


def _downsample(img: np.ndarray) -> np.ndarray:
    blurred = ndimage.gaussian_filter(img, sigma=1.0, mode="nearest")
    return blurred[::2, ::2]


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return ndimage.map_coordinates(img, [ys + v, xs + u], order=1, mode="nearest")


def _hs_increment(a, b_warped, alpha, iterations):
    fx_a, fy_a = np.gradient(a, axis=1), np.gradient(a, axis=0)
    fx_b, fy_b = np.gradient(b_warped, axis=1), np.gradient(b_warped, axis=0)
    fx = 0.5 * (fx_a + fx_b)
    fy = 0.5 * (fy_a + fy_b)
    ft = b_warped - a
    denom = alpha**2 + fx**2 + fy**2
    du = np.zeros_like(a)
    dv = np.zeros_like(a)
    for _ in range(iterations):
        du_avg = convolve2d(du, _AVG_KERNEL, mode="same", boundary="symm")
        dv_avg = convolve2d(dv, _AVG_KERNEL, mode="same", boundary="symm")
        t = (fx * du_avg + fy * dv_avg + ft) / denom
        du = du_avg - fx * t
        dv = dv_avg - fy * t
    return du, dv


def estimate_flow(frame_a: np.ndarray, frame_b: np.ndarray, params: FlowParams = FlowParams()) -> FlowField:
    """Dense flow carrying frame_a onto frame_b (a(p) ~ b(p + flow(p)))."""
    if frame_a.shape != frame_b.shape:
        raise DimensionMismatch(f"frame shapes differ: {frame_a.shape} vs {frame_b.shape}")
    a = to_luma(frame_a) * 255.0
    b = to_luma(frame_b) * 255.0

    h, w = a.shape
    levels = max(1, min(params.levels, int(np.floor(np.log2(max(min(h, w), 1) / 8.0))) + 1))
    pyr_a, pyr_b = [a], [b]
    for _ in range(levels - 1):
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))
    pyr_a.reverse()
    pyr_b.reverse()

    u = np.zeros_like(pyr_a[0])
    v = np.zeros_like(pyr_a[0])
    for la, lb in zip(pyr_a, pyr_b):
        if u.shape != la.shape:
            scale_x = la.shape[1] / u.shape[1]
            scale_y = la.shape[0] / u.shape[0]
            u = _resize_bilinear(u, la.shape) * scale_x
            v = _resize_bilinear(v, la.shape) * scale_y
        b_warped = _warp(lb, u, v)
        du, dv = _hs_increment(la, b_warped, params.smoothness, params.iterations)
        u = u + du
        v = v + dv

    return FlowField(u=np.nan_to_num(u), v=np.nan_to_num(v))
