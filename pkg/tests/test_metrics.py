import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bginpaint.errors import DimensionMismatch, EmptyCounts
from bginpaint.metrics import (
    BackgroundScores,
    ConfusionCounts,
    background_metrics,
    confusion,
    cqm,
    ms_ssim,
    psnr,
    segmentation_metrics,
)
from bginpaint.synth import smooth_texture


def brute_confusion(truth, pred):
    tp = tn = fp = fn = 0
    for r in range(truth.shape[0]):
        for c in range(truth.shape[1]):
            t, p = truth[r, c] > 0, pred[r, c] > 0
            if t and p:
                tp += 1
            elif t and not p:
                fn += 1
            elif not t and p:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


class TestSegmentationMetrics:
    def test_hand_computed_case(self):
        # independent evaluation of the ratio definitions
        tp, fp, fn, tn = 50, 10, 30, 910
        s = segmentation_metrics(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn))
        assert s.re == pytest.approx(tp / (tp + fn), abs=1e-9)
        assert s.re == pytest.approx(0.6250, abs=1e-6)
        assert s.sp == pytest.approx(910 / 920, abs=1e-9)
        assert s.fnr == pytest.approx(0.3750, abs=1e-6)
        assert s.pwc == pytest.approx(4.0000, abs=1e-6)
        assert s.pre == pytest.approx(50 / 60, abs=1e-9)
        pre, re = 50 / 60, 0.625
        assert s.f == pytest.approx(2 * pre * re / (pre + re), abs=1e-9)
        assert s.f == pytest.approx(0.714285714, abs=1e-6)

    def test_perfect_prediction(self):
        s = segmentation_metrics(ConfusionCounts(tp=100, tn=900, fp=0, fn=0))
        assert (s.re, s.sp, s.pre, s.f) == (1.0, 1.0, 1.0, 1.0)
        assert (s.fnr, s.pwc) == (0.0, 0.0)

    def test_degenerate_zero_tp(self):
        s = segmentation_metrics(ConfusionCounts(tp=0, tn=90, fp=10, fn=0))
        assert s.pre == 0.0 and s.f == 0.0
        assert s.degenerate

    def test_empty_counts_raises(self):
        with pytest.raises(EmptyCounts):
            segmentation_metrics(ConfusionCounts(0, 0, 0, 0))

    @given(
        st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500)
    )
    @settings(max_examples=100, deadline=None)
    def test_invariants(self, tp, tn, fp, fn):
        if tp + tn + fp + fn == 0:
            return
        s = segmentation_metrics(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn))
        if tp + fn > 0:
            assert s.fnr + s.re == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= s.re <= 1.0 and 0.0 <= s.sp <= 1.0 and 0.0 <= s.pre <= 1.0
        assert 0.0 <= s.f <= max(s.pre, s.re) + 1e-12
        assert 0.0 <= s.pwc <= 100.0


class TestConfusion:
    def test_all_foreground(self):
        ones = np.ones((5, 5), np.uint8)
        c = confusion(ones, ones)
        assert (c.tp, c.tn, c.fp, c.fn) == (25, 0, 0, 0)

    def test_truth_fg_pred_bg(self):
        c = confusion(np.ones((4, 4), np.uint8), np.zeros((4, 4), np.uint8))
        assert c.fn == 16 and c.tp == 0

    def test_matches_brute_force_scan(self, rng):
        truth = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        pred = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        assert confusion(truth, pred) == brute_confusion(truth, pred)

    def test_roi_restricts_counts(self):
        truth = np.ones((4, 4), np.uint8)
        pred = np.ones((4, 4), np.uint8)
        roi = np.zeros((4, 4), np.uint8)
        roi[:2] = 1
        c = confusion(truth, pred, roi)
        assert c.total == 8 and c.tp == 8

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            confusion(np.ones((3, 3), np.uint8), np.ones((3, 4), np.uint8))


class TestBackgroundMetrics:
    def test_identity_scores(self, rng):
        img = smooth_texture(48, 48, rng, channels=3)
        s = background_metrics(img, img)
        assert s.age == 0.0 and s.peps == 0.0 and s.pceps == 0.0
        assert s.psnr == 100.0
        assert s.msssim == pytest.approx(1.0, abs=1e-9)

    def test_uniform_offset_below_threshold(self):
        truth = np.full((32, 32), 0.4)
        est = truth + 10 / 255.0
        s = background_metrics(est, truth, tau_e=20.0)
        assert s.age == pytest.approx(10.0, abs=1e-9)
        assert s.peps == 0.0 and s.pceps == 0.0

    def test_uniform_offset_above_threshold(self):
        truth = np.full((32, 32), 0.4)
        est = truth + 30 / 255.0
        s = background_metrics(est, truth, tau_e=20.0)
        assert s.age == pytest.approx(30.0, abs=1e-9)
        assert s.peps == 1.0 and s.pceps == 1.0

    def test_pceps_requires_clustered_neighbors(self):
        truth = np.full((9, 9), 0.2)
        est = truth.copy()
        est[4, 4] += 0.5  # single error pixel: an EP, not a clustered EP
        s = background_metrics(est, truth)
        assert s.peps == pytest.approx(1 / 81)
        assert s.pceps == 0.0

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_pceps_never_exceeds_peps(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.random((12, 12))
        b = rng.random((12, 12))
        s = background_metrics(a, b)
        assert s.pceps <= s.peps + 1e-12

    def test_psnr_known_value(self):
        truth = np.zeros((10, 10))
        est = np.full((10, 10), 10 / 255.0)
        # mse = 100 -> psnr = 10*log10(255^2/100)
        assert psnr(est, truth) == pytest.approx(10 * np.log10(255**2 / 100), abs=1e-6)

    def test_msssim_decreases_with_noise(self, rng):
        img = smooth_texture(96, 96, rng, channels=1)
        noisy = np.clip(img + rng.normal(0, 0.15, img.shape), 0, 1)
        assert ms_ssim(img, noisy) < ms_ssim(img, img)

    def test_cqm_identity_capped(self, rng):
        img = rng.random((16, 16, 3))
        assert cqm(img, img) == pytest.approx(100.0)

    def test_cqm_grayscale_falls_back_to_psnr(self, rng):
        a, b = rng.random((16, 16)), rng.random((16, 16))
        assert cqm(a, b) == pytest.approx(psnr(a, b))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            background_metrics(rng.random((8, 8)), rng.random((9, 8)))
