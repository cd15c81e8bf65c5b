"""Background-quality and segmentation metrics.

Background measures follow the scene-background-modeling benchmark
conventions: AGE is the mean absolute luma difference in gray levels,
pEPs the fraction of pixels with error above tau_e, pCEPs the fraction
whose entire in-image 4-neighborhood also errs, PSNR is on luma with
MAX=255 and capped at 100 dB, MS-SSIM is the 5-scale index on luma,
and CQM weights luminance/chrominance PSNR (0.9449 / 0.0551).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataio import to_luma
from .errors import DimensionMismatch, EmptyCounts

TAU_E_DEFAULT = 20.0
PSNR_CAP = 100.0

# luminance vs chrominance sensitivity weights of the CQM measure
CQM_LUMA_WEIGHT = 0.9449
CQM_CHROMA_WEIGHT = 0.0551

_MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

_RGB_TO_YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.14713, -0.28886, 0.436],
        [0.615, -0.51499, -0.10001],
    ]
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


@dataclass(frozen=True)
class BackgroundScores:
    age: float
    peps: float
    pceps: float
    psnr: float
    msssim: float
    cqm: float


@dataclass(frozen=True)
class SegScores:
    re: float
    sp: float
    fnr: float
    pwc: float
    pre: float
    f: float
    degenerate: bool = False


def confusion(
    truth_mask: np.ndarray, pred_mask: np.ndarray, roi: np.ndarray | None = None
) -> ConfusionCounts:
    """Pixel counts with foreground as the positive class."""
    if truth_mask.shape != pred_mask.shape:
        raise DimensionMismatch(f"masks differ: {truth_mask.shape} vs {pred_mask.shape}")
    t = np.asarray(truth_mask) > 0
    p = np.asarray(pred_mask) > 0
    if roi is not None:
        if roi.shape != t.shape:
            raise DimensionMismatch(f"roi {roi.shape} vs masks {t.shape}")
        keep = np.asarray(roi) > 0
        t, p = t[keep], p[keep]
    return ConfusionCounts(
        tp=int(np.sum(t & p)),
        tn=int(np.sum(~t & ~p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
    )


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den <= 0:
        return 0.0, True
    return num / den, False


def segmentation_metrics(c: ConfusionCounts) -> SegScores:
    """Recall, specificity, FNR, PWC, precision, and F measure; 0/0
    ratios come back as 0 with the degeneracy flag set."""
    if c.total <= 0:
        raise EmptyCounts("no pixels counted")
    re, d1 = _ratio(c.tp, c.tp + c.fn)
    sp, d2 = _ratio(c.tn, c.tn + c.fp)
    fnr, _ = _ratio(c.fn, c.tp + c.fn)
    pwc = 100.0 * (c.fn + c.fp) / c.total
    pre, d3 = _ratio(c.tp, c.tp + c.fp)
    f, d4 = _ratio(2.0 * pre * re, pre + re)
    return SegScores(re=re, sp=sp, fnr=fnr, pwc=pwc, pre=pre, f=f, degenerate=d1 or d2 or d3 or d4)


def _psnr_from_mse(mse: float, peak: float = 255.0) -> float:
    if mse <= 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(peak**2 / mse), PSNR_CAP)


def psnr(estimate: np.ndarray, truth: np.ndarray) -> float:
    """PSNR on luma in dB, MAX=255, capped at 100."""
    e = to_luma(estimate) * 255.0
    t = to_luma(truth) * 255.0
    return _psnr_from_mse(float(np.mean((e - t) ** 2)))


def _ssim_terms(a: np.ndarray, b: np.ndarray, sigma: float = 1.5):
    c1 = (0.01) ** 2
    c2 = (0.03) ** 2

    def blur(x):
        return ndimage.gaussian_filter(x, sigma, truncate=3.5)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return float(np.mean(lum)), float(np.mean(cs))


def ms_ssim(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Multi-scale structural similarity on luma, clamped to [0, 1].

    Uses the standard 5-scale weights; scales that would shrink the
    image below the filter support are dropped and the remaining
    weights renormalized.
    """
    a = to_luma(estimate)
    b = to_luma(truth)
    max_levels = 1
    side = min(a.shape)
    while max_levels < 5 and side // 2 >= 11:
        side //= 2
        max_levels += 1
    weights = np.array(_MSSSIM_WEIGHTS[:max_levels])
    weights = weights / weights.sum()

    value = 1.0
    for level in range(max_levels):
        lum, cs = _ssim_terms(a, b)
        if level < max_levels - 1:
            value *= max(cs, 0.0) ** weights[level]
            a = _avg_pool(a)
            b = _avg_pool(b)
        else:
            value *= max(lum * cs, 0.0) ** weights[level]
    return float(np.clip(value, 0.0, 1.0))


def _avg_pool(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    x = x[: h - h % 2, : w - w % 2]
    return x.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def cqm(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Color quality measure from YUV-plane PSNRs; PSNR itself for
    grayscale input."""
    if estimate.ndim == 2 or truth.ndim == 2:
        return psnr(estimate, truth)
    e = np.tensordot(estimate * 255.0, _RGB_TO_YUV.T, axes=1)
    t = np.tensordot(truth * 255.0, _RGB_TO_YUV.T, axes=1)
    p = [_psnr_from_mse(float(np.mean((e[..., k] - t[..., k]) ** 2))) for k in range(3)]
    return CQM_LUMA_WEIGHT * p[0] + CQM_CHROMA_WEIGHT * (p[1] + p[2]) / 2.0


def background_metrics(
    estimate: np.ndarray, truth: np.ndarray, tau_e: float = TAU_E_DEFAULT
) -> BackgroundScores:
    """All six background-quality scores for one image pair."""
    if estimate.shape != truth.shape:
        raise DimensionMismatch(f"images differ: {estimate.shape} vs {truth.shape}")
    diff = np.abs(to_luma(estimate) - to_luma(truth)) * 255.0
    err = diff > tau_e
    peps = float(np.mean(err))
    pceps = float(np.mean(err & _neighbors_all(err)))
    return BackgroundScores(
        age=float(np.mean(diff)),
        peps=peps,
        pceps=pceps,
        psnr=psnr(estimate, truth),
        msssim=ms_ssim(estimate, truth),
        cqm=cqm(estimate, truth),
    )


def _neighbors_all(err: np.ndarray) -> np.ndarray:
    """True where every in-image 4-neighbor is an error pixel
    (neighbors outside the image are vacuously errors)."""
    padded = np.pad(err, 1, constant_values=True)
    return (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
