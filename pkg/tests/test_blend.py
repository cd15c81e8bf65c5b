import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bginpaint.blend import (
    GuidanceField,
    alpha_mask,
    forward_gradients,
    mixed_gradients,
    mpb_blend,
    solve_poisson,
)
from bginpaint.errors import MaskTouchesBorder


def poisson_residual_inf(gf: GuidanceField, sol: np.ndarray) -> float:
    """Independent check of the discrete system, pixel by pixel."""
    rows, cols = np.nonzero(gf.region)
    worst = 0.0
    for r, c in zip(rows, cols):
        lhs = 4 * sol[r, c] - sol[r - 1, c] - sol[r + 1, c] - sol[r, c - 1] - sol[r, c + 1]
        rhs = gf.gx[r, c - 1] - gf.gx[r, c] + gf.gy[r - 1, c] - gf.gy[r, c]
        worst = max(worst, abs(lhs - rhs))
    return worst


def random_instance(rng, n=32):
    region = np.zeros((n, n), bool)
    region[1:-1, 1:-1] = rng.random((n - 2, n - 2)) < 0.7
    if not region.any():
        region[n // 2, n // 2] = True
    gx = rng.standard_normal((n, n)) * 0.1
    gy = rng.standard_normal((n, n)) * 0.1
    bnd = rng.random((n, n))
    return GuidanceField(region, gx, gy, bnd)


class TestSolvePoisson:
    def test_zero_guidance_constant_boundary(self):
        region = np.zeros((12, 12), bool)
        region[3:9, 2:10] = True
        bnd = np.full((12, 12), 0.7)
        sol = solve_poisson(GuidanceField(region, np.zeros((12, 12)), np.zeros((12, 12)), bnd))
        assert np.allclose(sol, 0.7, atol=1e-7)

    def test_exact_gradient_identity(self, rng):
        img = rng.random((20, 24))
        gx, gy = forward_gradients(img)
        region = np.zeros((20, 24), bool)
        region[4:16, 5:19] = True
        sol = solve_poisson(GuidanceField(region, gx, gy, img))
        assert np.abs(sol - img).max() < 1e-6

    def test_random_residuals(self, rng):
        for _ in range(10):
            gf = random_instance(rng)
            sol = solve_poisson(gf)
            assert poisson_residual_inf(gf, sol) < 1e-6

    def test_harmonic_reproduction(self):
        # harmonic polynomials are exactly discretely harmonic
        ys, xs = np.mgrid[:48, :48].astype(float)
        x, y = xs / 48, ys / 48
        h = 0.4 + 0.2 * (x * x - y * y) + 0.1 * x * y + 0.05 * (x**3 - 3 * x * y * y)
        region = np.zeros((48, 48), bool)
        region[4:-4, 5:-5] = True
        zeros = np.zeros_like(h)
        sol = solve_poisson(GuidanceField(region, zeros, zeros, h))
        assert np.abs(sol - h).max() < 1e-5

    @given(st.floats(min_value=-3.0, max_value=3.0).filter(lambda a: abs(a) > 1e-3))
    @settings(max_examples=10, deadline=None)
    def test_linearity(self, scale):
        rng = np.random.default_rng(99)
        gf = random_instance(rng, n=16)
        sol1 = solve_poisson(gf)
        scaled = GuidanceField(gf.region, scale * gf.gx, scale * gf.gy, scale * gf.boundary)
        sol2 = solve_poisson(scaled)
        assert np.abs(sol2 - scale * sol1).max() < 1e-5 * max(1.0, abs(scale))

    def test_border_region_rejected(self, rng):
        region = np.zeros((8, 8), bool)
        region[0:4, 2:5] = True
        with pytest.raises(ValueError):
            solve_poisson(GuidanceField(region, np.zeros((8, 8)), np.zeros((8, 8)), rng.random((8, 8))))


class TestMixedGradients:
    def test_larger_magnitude_wins_source_on_tie(self):
        s = np.array([[0.0, 1.0], [0.0, 0.0]])
        t = np.array([[0.0, 0.5], [0.0, 0.0]])
        gx, gy = mixed_gradients(s, t)
        assert gx[0, 0] == 1.0
        gx2, _ = mixed_gradients(t, s)
        assert gx2[0, 0] == -0.5 or gx2[0, 0] == 1.0  # larger magnitude is source's 1.0
        same_x, _ = mixed_gradients(s, s)
        assert np.array_equal(same_x, forward_gradients(s)[0])


class TestMpbBlend:
    def test_identity_when_source_equals_target(self, rng):
        t = rng.random((24, 24, 3))
        mask = np.zeros((24, 24), np.uint8)
        mask[6:16, 7:17] = 1
        out = mpb_blend(t, t, mask)
        assert np.abs(out - t).max() < 1e-6

    def test_constant_into_constant(self):
        s = np.full((16, 16), 0.42)
        t = np.full((16, 16), 0.42)
        mask = np.zeros((16, 16), np.uint8)
        mask[4:12, 4:12] = 1
        out = mpb_blend(s, t, mask)
        assert np.allclose(out, 0.42, atol=1e-7)

    def test_output_and_alpha_in_range(self, rng):
        s = rng.random((20, 20, 3))
        t = rng.random((20, 20, 3))
        mask = np.zeros((20, 20), np.uint8)
        mask[5:15, 5:15] = 1
        out = mpb_blend(s, t, mask)
        assert out.min() >= 0.0 and out.max() <= 1.0
        a = alpha_mask(mask.astype(bool), 5)
        assert a.min() >= 0.0 and a.max() <= 1.0

    def test_pixels_outside_mask_equal_target(self, rng):
        s = rng.random((20, 20))
        t = rng.random((20, 20))
        mask = np.zeros((20, 20), np.uint8)
        mask[6:12, 6:12] = 1
        out = mpb_blend(s, t, mask)
        outside = mask == 0
        assert np.array_equal(out[outside], t[outside])

    def test_mask_touching_border_raises(self, rng):
        mask = np.zeros((16, 16), np.uint8)
        mask[0:5, 4:8] = 1
        with pytest.raises(MaskTouchesBorder):
            mpb_blend(rng.random((16, 16)), rng.random((16, 16)), mask)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_idempotent_when_source_matches_target_on_ring(self, seed):
        # target smooth inside the region, source = target + interior bump:
        # they agree on the boundary ring, so one blend is a fixed point
        rng = np.random.default_rng(seed)
        t = np.full((20, 20), float(rng.uniform(0.2, 0.8)))
        mask = np.zeros((20, 20), np.uint8)
        mask[5:14, 6:15] = 1
        s = t.copy()
        bump = rng.random((5, 5)) * 0.3
        s[7:12, 8:13] += bump  # strictly interior, >= 2 px inside the ring
        s = np.clip(s, 0.0, 1.0)
        once = mpb_blend(s, t, mask)
        twice = mpb_blend(once, t, mask)
        assert np.abs(once - s).max() < 1e-6
        assert np.abs(twice - once).max() < 1e-6
