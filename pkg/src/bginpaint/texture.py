"""Coarse-to-fine texture refinement of an inpainted patch.

At each pyramid scale the hole pixels descend a joint objective: a
context term anchoring to the previous scale's fill, a neural-patch
texture term matching feature patches inside the hole to their nearest
neighbors outside it, and a gradient-smoothness term. Descent is
fixed-step gradient descent with backtracking (halve on increase, grow
on success), so the objective never increases; nearest-neighbor
assignments are refreshed on a fixed interval and refreshing can only
lower the texture term.

Features come from a frozen, seeded convolutional stack; a trained
stack with the same call signature can be plugged in instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import (
    DimensionMismatch,
    DivergedObjective,
    IndivisibleSize,
    NoValidCandidate,
    TooSmall,
)

Hole = tuple[int, int, int]  # (row0, col0, side)


@dataclass(frozen=True)
class TextureWeights:
    gamma: float = 1e-2
    delta: float = 1e-4
    w: int = 3
    iterations: int = 200
    reassign_interval: int = 50
    search_window: int = 16

    def __post_init__(self) -> None:
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("gamma and delta must be nonnegative")
        if self.w < 1 or self.w % 2 == 0:
            raise ValueError(f"patch side w={self.w} must be odd and >= 1")


@dataclass
class PatchPyramid:
    """(image, hole) pairs ordered coarse to fine, scale step 2."""

    levels: list[tuple[np.ndarray, Hole]]


@dataclass
class FeatureMap:
    values: np.ndarray  # (Hf, Wf, C)
    stride: int


class FeatureStack(nn.Module):
    """Small frozen conv stack used as the patch-matching feature space."""

    def __init__(
        self,
        channels: int = 64,
        conv_layers: int = 3,
        pool_stages: int = 1,
        in_channels: int = 3,
        seed: int = 0,
        dtype: torch.dtype = torch.float64,
    ):
        super().__init__()
        if pool_stages > conv_layers:
            raise ValueError("pool_stages cannot exceed conv_layers")
        self.pool_stages = pool_stages
        self.in_channels = in_channels
        layers: list[nn.Module] = []
        cin = in_channels
        for i in range(conv_layers):
            layers += [nn.Conv2d(cin, channels, 3, padding=1), nn.ReLU()]
            if i < pool_stages:
                layers.append(nn.AvgPool2d(2))
            cin = channels
        self.net = nn.Sequential(*layers)
        g = torch.Generator().manual_seed(seed)
        for p in self.parameters():
            with torch.no_grad():
                if p.ndim > 1:
                    fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                    p.copy_(
                        torch.randn(p.shape, generator=g, dtype=torch.float64)
                        * np.sqrt(2.0 / fan_in)
                    )
                else:
                    p.zero_()
            p.requires_grad_(False)
        self.to(dtype)

    @property
    def stride(self) -> int:
        return 2**self.pool_stages

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


_STACK_CACHE: dict[tuple, FeatureStack] = {}


def default_stack(in_channels: int, depth: int = 1, channels: int = 64, seed: int = 0) -> FeatureStack:
    key = (in_channels, depth, channels, seed)
    if key not in _STACK_CACHE:
        _STACK_CACHE[key] = FeatureStack(
            channels=channels, pool_stages=depth, in_channels=in_channels, seed=seed
        )
    return _STACK_CACHE[key]


def _image_tensor(image: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return torch.from_numpy(arr.transpose(2, 0, 1)[None]).to(dtype)


def extract_features(image: np.ndarray, depth: int = 1, stack: FeatureStack | None = None) -> FeatureMap:
    """Deterministic feature grid from the frozen texture stack."""
    channels = 1 if image.ndim == 2 else image.shape[2]
    if stack is None:
        stack = default_stack(channels, depth=depth)
    if min(image.shape[0], image.shape[1]) < stack.stride:
        raise TooSmall(f"image {image.shape[:2]} smaller than feature stride {stack.stride}")
    dtype = next(stack.parameters()).dtype
    with torch.no_grad():
        out = stack(_image_tensor(image, dtype))
    values = out.numpy()[0].transpose(1, 2, 0).astype(np.float64)
    return FeatureMap(values=values, stride=stack.stride)


def scale_hole(hole: Hole, stride: int) -> Hole:
    r0, c0, side = hole
    if r0 % stride or c0 % stride or side % stride:
        raise DimensionMismatch(f"hole {hole} not aligned to feature stride {stride}")
    return (r0 // stride, c0 // stride, side // stride)


def _hole_cells(hole: Hole) -> list[tuple[int, int]]:
    r0, c0, side = hole
    return [(r, c) for r in range(r0, r0 + side) for c in range(c0, c0 + side)]


def _overlaps_hole(r: int, c: int, half: int, hole: Hole) -> bool:
    r0, c0, side = hole
    return (r + half >= r0 and r - half < r0 + side) and (c + half >= c0 and c - half < c0 + side)


def nearest_patch(
    fm: FeatureMap | np.ndarray,
    hole: Hole,
    i: tuple[int, int],
    w: int,
    window: int,
) -> tuple[int, int]:
    """Location of the closest non-hole feature patch to the one at ``i``.

    Candidates lie within a Chebyshev ``window`` of ``i``, fully inside
    the grid and fully outside the hole; ties break to the smallest
    row-major index.
    """
    values = fm.values if isinstance(fm, FeatureMap) else fm
    hf, wf = values.shape[:2]
    half = w // 2
    r, c = i
    r0, c0, side = hole
    if not (r0 <= r < r0 + side and c0 <= c < c0 + side):
        raise ValueError(f"query {i} outside hole {hole}")
    if r - half < 0 or c - half < 0 or r + half >= hf or c + half >= wf:
        raise TooSmall(f"query patch at {i} leaves the {hf}x{wf} feature grid")
    query = values[r - half : r + half + 1, c - half : c + half + 1]

    best = None
    best_dist = np.inf
    for rr in range(max(half, r - window), min(hf - half, r + window + 1)):
        for cc in range(max(half, c - window), min(wf - half, c + window + 1)):
            if _overlaps_hole(rr, cc, half, hole):
                continue
            cand = values[rr - half : rr + half + 1, cc - half : cc + half + 1]
            dist = float(np.sum((query - cand) ** 2))
            if dist < best_dist:
                best_dist = dist
                best = (rr, cc)
    if best is None:
        raise NoValidCandidate(f"no candidate patch within window {window} of {i}")
    return best


def compute_np_map(
    fm: FeatureMap | np.ndarray, hole: Hole, w: int, window: int
) -> dict[tuple[int, int], tuple[int, int]]:
    """Nearest-neighbor assignment for every hole cell, widening the
    search window when it comes up empty."""
    values = fm.values if isinstance(fm, FeatureMap) else fm
    hf, wf = values.shape[:2]
    half = w // 2
    windows = np.lib.stride_tricks.sliding_window_view(values, (w, w), axis=(0, 1))
    valid = np.ones((hf - w + 1, wf - w + 1), dtype=bool)
    for rr in range(valid.shape[0]):
        for cc in range(valid.shape[1]):
            if _overlaps_hole(rr + half, cc + half, half, hole):
                valid[rr, cc] = False

    assignments = {}
    for r, c in _hole_cells(hole):
        if r - half < 0 or c - half < 0 or r + half >= hf or c + half >= wf:
            raise TooSmall(f"query patch at {(r, c)} leaves the {hf}x{wf} feature grid")
        query = values[r - half : r + half + 1, c - half : c + half + 1]
        win = window
        found = None
        while found is None:
            rlo, rhi = max(half, r - win), min(hf - half - 1, r + win)
            clo, chi = max(half, c - win), min(wf - half - 1, c + win)
            sub_valid = valid[rlo - half : rhi - half + 1, clo - half : chi - half + 1]
            if sub_valid.any():
                sub = windows[rlo - half : rhi - half + 1, clo - half : chi - half + 1]
                # windows axes: (row, col, C, w, w); query is (w, w, C)
                diff = sub - query.transpose(2, 0, 1)[None, None]
                dists = np.einsum("rcijk->rc", diff * diff)
                dists = np.where(sub_valid, dists, np.inf)
                flat = int(np.argmin(dists))  # first occurrence = smallest row-major
                rr, cc = np.unravel_index(flat, dists.shape)
                found = (rlo + int(rr), clo + int(cc))
            else:
                if rlo == half and clo == half and rhi == hf - half - 1 and chi == wf - half - 1:
                    raise NoValidCandidate(f"feature grid has no patch outside hole {hole}")
                win *= 2
        assignments[(r, c)] = found
    return assignments


def texture_energy(
    fm: FeatureMap | np.ndarray,
    hole: Hole,
    w: int,
    assignments: dict[tuple[int, int], tuple[int, int]],
) -> float:
    """Mean squared feature-patch distance between hole cells and their
    assigned matches."""
    values = fm.values if isinstance(fm, FeatureMap) else fm
    half = w // 2
    cells = _hole_cells(hole)
    total = 0.0
    for r, c in cells:
        rr, cc = assignments[(r, c)]
        q = values[r - half : r + half + 1, c - half : c + half + 1]
        m = values[rr - half : rr + half + 1, cc - half : cc + half + 1]
        total += float(np.sum((q - m) ** 2))
    return total / len(cells)


def context_energy(current: np.ndarray, reference: np.ndarray, hole: Hole) -> float:
    """Mean squared difference over the hole region."""
    if current.shape != reference.shape:
        raise DimensionMismatch(f"shapes differ: {current.shape} vs {reference.shape}")
    r0, c0, side = hole
    cur = current[r0 : r0 + side, c0 : c0 + side]
    ref = reference[r0 : r0 + side, c0 : c0 + side]
    return float(np.mean((cur - ref) ** 2))


def gradient_energy(image: np.ndarray) -> float:
    """Sum of squared forward differences, out-of-range terms omitted."""
    x = np.asarray(image, dtype=np.float64)
    total = 0.0
    if x.shape[1] >= 2:
        total += float(np.sum((x[:, 1:] - x[:, :-1]) ** 2))
    if x.shape[0] >= 2:
        total += float(np.sum((x[1:, :] - x[:-1, :]) ** 2))
    return total


def build_pyramid(patch: np.ndarray, hole: Hole, levels: int) -> PatchPyramid:
    """Area-averaged pyramid, coarse to fine, scale step 2."""
    side = patch.shape[0]
    if patch.shape[1] != side:
        raise DimensionMismatch(f"patch must be square, got {patch.shape[:2]}")
    factor = 2 ** (levels - 1)
    if side % factor != 0 or (side // factor) % 4 != 0:
        raise IndivisibleSize(f"patch side {side} not divisible into {levels} halving levels")
    r0, c0, hside = hole
    if hside != side // 2 or r0 != side // 4 or c0 != side // 4:
        raise ValueError(f"hole {hole} is not the centered half-side region of a {side} patch")

    out = [(np.asarray(patch, dtype=np.float64), hole)]
    for _ in range(levels - 1):
        img, (hr, hc, hs) = out[-1]
        out.append((_halve(img), (hr // 2, hc // 2, hs // 2)))
    out.reverse()
    return PatchPyramid(levels=out)


def _halve(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    if img.ndim == 2:
        return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
    return img.reshape(h // 2, 2, w // 2, 2, img.shape[2]).mean(axis=(1, 3))


def _upsample2x(img: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)


def _torch_objective(
    x: torch.Tensor,
    ref_hole: torch.Tensor,
    hole: Hole,
    weights: TextureWeights,
    stack: FeatureStack | None,
    assignments: dict | None,
) -> torch.Tensor:
    r0, c0, side = hole
    cur_hole = x[:, :, r0 : r0 + side, c0 : c0 + side]
    obj = ((cur_hole - ref_hole) ** 2).mean()
    if weights.gamma > 0 and assignments:
        feats = stack(x)[0]  # (C, Hf, Wf)
        half = weights.w // 2
        w = weights.w
        unf = feats.unfold(1, w, 1).unfold(2, w, 1)  # (C, Hr, Wc, w, w)
        qs = torch.tensor([[r - half, c - half] for (r, c) in assignments], dtype=torch.long)
        ms = torch.tensor(
            [[rr - half, cc - half] for (rr, cc) in assignments.values()], dtype=torch.long
        )
        qpatch = unf[:, qs[:, 0], qs[:, 1]]  # (C, n, w, w)
        mpatch = unf[:, ms[:, 0], ms[:, 1]]
        e_t = ((qpatch - mpatch) ** 2).sum(dim=(0, 2, 3)).mean()
        obj = obj + weights.gamma * e_t
    if weights.delta > 0:
        dx = x[:, :, :, 1:] - x[:, :, :, :-1]
        dy = x[:, :, 1:, :] - x[:, :, :-1, :]
        obj = obj + weights.delta * ((dx**2).sum() + (dy**2).sum())
    return obj


def objective_value(
    image: np.ndarray,
    hole: Hole,
    reference: np.ndarray,
    weights: TextureWeights,
    stack: FeatureStack | None = None,
    assignments: dict | None = None,
) -> float:
    """Joint objective at a point, with a fixed nearest-neighbor map."""
    base = _image_tensor(image, torch.float64)
    r0, c0, side = hole
    ref_hole = _image_tensor(reference, torch.float64)[:, :, r0 : r0 + side, c0 : c0 + side]
    with torch.no_grad():
        return float(_torch_objective(base, ref_hole, hole, weights, stack, assignments))


def objective_gradient(
    image: np.ndarray,
    hole: Hole,
    reference: np.ndarray,
    weights: TextureWeights,
    stack: FeatureStack | None = None,
    assignments: dict | None = None,
) -> np.ndarray:
    """Gradient of the joint objective w.r.t. the hole pixels."""
    base = _image_tensor(image, torch.float64)
    r0, c0, side = hole
    ref_hole = _image_tensor(reference, torch.float64)[:, :, r0 : r0 + side, c0 : c0 + side]
    hole_var = base[:, :, r0 : r0 + side, c0 : c0 + side].clone().requires_grad_(True)
    x = base.clone()
    x[:, :, r0 : r0 + side, c0 : c0 + side] = hole_var
    obj = _torch_objective(x, ref_hole, hole, weights, stack, assignments)
    obj.backward()
    grad = hole_var.grad.numpy()[0].transpose(1, 2, 0)
    return grad[:, :, 0] if image.ndim == 2 else grad


def optimize_scale(
    init: np.ndarray,
    hole: Hole,
    reference: np.ndarray,
    weights: TextureWeights,
    stack: FeatureStack | None = None,
    history: list | None = None,
) -> np.ndarray:
    """Descend the joint objective over hole pixels only.

    ``history``, when given, collects the objective value at each
    reassignment epoch (non-increasing by construction).
    """
    if init.shape != reference.shape:
        raise DimensionMismatch(f"shapes differ: {init.shape} vs {reference.shape}")
    r0, c0, side = hole
    channels = 1 if init.ndim == 2 else init.shape[2]
    if weights.gamma > 0 and stack is None:
        stack = default_stack(channels, depth=1)

    base = _image_tensor(init, torch.float64)
    ref_hole = _image_tensor(reference, torch.float64)[:, :, r0 : r0 + side, c0 : c0 + side]
    hole_var = base[:, :, r0 : r0 + side, c0 : c0 + side].clone().requires_grad_(True)

    def compose() -> torch.Tensor:
        x = base.clone()
        x[:, :, r0 : r0 + side, c0 : c0 + side] = hole_var
        return x

    assignments: dict | None = None
    feat_hole: Hole | None = None
    if weights.gamma > 0:
        feat_hole = scale_hole(hole, stack.stride)

    step = 1.0
    n_epochs = max(1, -(-weights.iterations // weights.reassign_interval))
    it = 0
    for _ in range(n_epochs):
        if weights.gamma > 0:
            with torch.no_grad():
                feats = stack(compose())[0].numpy().transpose(1, 2, 0)
            assignments = compute_np_map(feats, feat_hole, weights.w, weights.search_window)
        current_obj = None
        for _ in range(min(weights.reassign_interval, weights.iterations - it)):
            it += 1
            obj = _torch_objective(compose(), ref_hole, hole, weights, stack, assignments)
            current_obj = float(obj.detach())
            if not np.isfinite(current_obj):
                raise DivergedObjective(f"objective is {current_obj}")
            if hole_var.grad is not None:
                hole_var.grad.zero_()
            obj.backward()
            grad = hole_var.grad
            if float(grad.abs().max()) == 0.0:
                break
            accepted = False
            for _ in range(60):
                with torch.no_grad():
                    trial = hole_var - step * grad
                trial_obj = float(
                    _torch_objective(
                        _compose_with(base, trial, hole), ref_hole, hole, weights, stack, assignments
                    ).detach()
                )
                if np.isfinite(trial_obj) and trial_obj <= current_obj:
                    with torch.no_grad():
                        hole_var.copy_(trial)
                    current_obj = trial_obj
                    step *= 1.5
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        if history is not None:
            if current_obj is None:
                current_obj = float(
                    _torch_objective(compose(), ref_hole, hole, weights, stack, assignments).detach()
                )
            history.append(current_obj)

    out = base.clone()
    with torch.no_grad():
        out[:, :, r0 : r0 + side, c0 : c0 + side] = hole_var
    arr = out.numpy()[0].transpose(1, 2, 0)
    arr = arr[:, :, 0] if channels == 1 else arr
    return np.clip(arr, 0.0, 1.0)


def _compose_with(base: torch.Tensor, hole_values: torch.Tensor, hole: Hole) -> torch.Tensor:
    r0, c0, side = hole
    x = base.clone()
    x[:, :, r0 : r0 + side, c0 : c0 + side] = hole_values
    return x


def refine(
    x_o: np.ndarray,
    hole: Hole,
    levels: int,
    weights: TextureWeights,
    stack: FeatureStack | None = None,
    on_level=None,
) -> np.ndarray:
    """Run optimize_scale coarse to fine, upsampling each hole fill as
    the next level's initialization; pixels outside the hole pass
    through untouched. ``on_level(index, image)`` receives each scale's
    result for debug dumps."""
    pyramid = build_pyramid(x_o, hole, levels)
    result = None
    for level, (img, lv_hole) in enumerate(pyramid.levels):
        init = img.copy()
        if result is not None:
            up = _upsample2x(result)
            r0, c0, side = lv_hole
            init[r0 : r0 + side, c0 : c0 + side] = up[r0 : r0 + side, c0 : c0 + side]
        result = optimize_scale(init, lv_hole, init, weights, stack=stack)
        if on_level is not None:
            on_level(level, result)
    return result
