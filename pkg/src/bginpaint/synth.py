"""Synthetic sequences with known background and foreground masks.

Used by tests and the example scripts: textured static backgrounds with
a square occluder moving across them.
"""

from __future__ import annotations

import numpy as np


def periodic_texture(
    h: int, w: int, rng: np.random.Generator, waves: int = 6, contrast: float = 0.8
) -> np.ndarray:
    """Band-limited periodic grayscale texture in [0, 1].

    Spatial periods stay >= 16 px so small integer shifts are
    unambiguous (no lattice aliasing).
    """
    ys, xs = np.mgrid[:h, :w]
    tex = np.zeros((h, w))
    for _ in range(waves):
        fy = rng.integers(0, max(2, h // 16))
        fx = rng.integers(0, max(2, w // 16))
        if fy == 0 and fx == 0:
            fx = 1
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.3, 1.0)
        tex += amp * np.sin(2 * np.pi * (fy * ys / h + fx * xs / w) + phase)
    tex -= tex.min()
    top = tex.max()
    if top > 0:
        tex /= top
    return 0.5 + contrast * (tex - 0.5)


def smooth_texture(
    h: int,
    w: int,
    rng: np.random.Generator,
    channels: int = 3,
    sigma: float = 5.0,
    lo: float = 0.15,
    hi: float = 0.85,
) -> np.ndarray:
    """Gaussian-filtered noise texture, stretched to [lo, hi]."""
    from scipy import ndimage

    shape = (h, w) if channels == 1 else (h, w, channels)
    noise = rng.standard_normal(shape)
    if channels == 1:
        tex = ndimage.gaussian_filter(noise, sigma)
    else:
        tex = np.stack(
            [ndimage.gaussian_filter(noise[..., k], sigma) for k in range(channels)], axis=-1
        )
    tex -= tex.min()
    top = tex.max()
    if top > 0:
        tex /= top
    return lo + (hi - lo) * tex


def moving_square_sequence(
    n_frames: int,
    background: np.ndarray,
    square: int = 20,
    speed: tuple[int, int] = (2, 1),
    start: tuple[int, int] = (30, 30),
    margin: int = 12,
    color: float | tuple = 0.05,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Frames of a square bouncing over a static background.

    Returns (frames, true foreground masks). The square stays at least
    ``margin`` pixels away from every border.
    """
    h = background.shape[0]
    w = background.shape[1]
    r, c = start
    dr, dc = speed
    frames, masks = [], []
    for _ in range(n_frames):
        frame = background.copy()
        frame[r : r + square, c : c + square] = color
        mask = np.zeros((h, w), dtype=np.uint8)
        mask[r : r + square, c : c + square] = 1
        frames.append(frame)
        masks.append(mask)
        if not (margin <= r + dr and r + dr + square <= h - margin):
            dr = -dr
        if not (margin <= c + dc and c + dc + square <= w - margin):
            dc = -dc
        r += dr
        c += dc
    return frames, masks
