import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bginpaint.errors import DimensionMismatch
from bginpaint.flow import FlowField, FlowParams, estimate_flow, flow_magnitude
from bginpaint.synth import periodic_texture


def test_magnitude_pythagorean():
    field = FlowField(u=np.array([[3.0]]), v=np.array([[4.0]]))
    assert flow_magnitude(field)[0, 0] == pytest.approx(5.0)


def test_magnitude_zero_field():
    field = FlowField(u=np.zeros((4, 5)), v=np.zeros((4, 5)))
    assert np.all(flow_magnitude(field) == 0.0)


def test_magnitude_sign_invariance():
    field = FlowField(u=np.array([[-1.0]]), v=np.array([[0.0]]))
    assert flow_magnitude(field)[0, 0] == pytest.approx(1.0)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_magnitude_negation_invariant(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((6, 7))
    v = rng.standard_normal((6, 7))
    a = flow_magnitude(FlowField(u, v))
    b = flow_magnitude(FlowField(-u, -v))
    assert np.allclose(a, b)


def test_identical_frames_give_zero_motion(rng):
    img = rng.random((48, 64, 3))
    field = estimate_flow(img, img)
    assert float(flow_magnitude(field).max()) < 1e-3


def test_constant_frames_stay_finite_and_still():
    img = np.full((40, 40), 0.5)
    field = estimate_flow(img, img.copy())
    assert np.isfinite(field.u).all() and np.isfinite(field.v).all()
    assert float(flow_magnitude(field).max()) < 1e-3


def test_shift_recovery_two_pixels(rng):
    tex = periodic_texture(64, 64, rng)
    shifted = np.roll(tex, 2, axis=1)
    field = estimate_flow(tex, shifted)
    assert 1.5 <= float(np.median(field.u)) <= 2.5
    assert abs(float(np.median(field.v))) < 0.5


def test_shift_recovery_both_components(rng):
    tex = periodic_texture(64, 64, rng)
    for dx, dy in [(3, 0), (0, -3), (-2, 1), (2, 2)]:
        shifted = np.roll(np.roll(tex, dy, axis=0), dx, axis=1)
        field = estimate_flow(tex, shifted)
        assert abs(float(np.median(field.u)) - dx) < 0.5, (dx, dy)
        assert abs(float(np.median(field.v)) - dy) < 0.5, (dx, dy)


def test_dimension_mismatch_raises(rng):
    with pytest.raises(DimensionMismatch):
        estimate_flow(rng.random((10, 10)), rng.random((10, 11)))


def test_flow_deterministic(rng):
    a = rng.random((32, 32))
    b = np.roll(a, 1, axis=1)
    f1 = estimate_flow(a, b, FlowParams(levels=3, iterations=40))
    f2 = estimate_flow(a, b, FlowParams(levels=3, iterations=40))
    assert np.array_equal(f1.u, f2.u) and np.array_equal(f1.v, f2.v)


def test_magnitude_image_normalizes_for_debug_output(rng):
    from bginpaint.flow import magnitude_image

    mag = rng.random((8, 8)) * 7
    img = magnitude_image(mag)
    assert img.min() >= 0.0 and img.max() == pytest.approx(1.0)
    assert np.all(magnitude_image(np.zeros((4, 4))) == 0.0)
