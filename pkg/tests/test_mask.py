import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from itoedit.mask import EditMask, estimate_mask, gaussian_kernel, gaussian_smooth, noise_difference
from itoedit.metrics import iou
from itoedit.scene import Condition, footprint, sample_scene
from oracles import dense_blur


def dilate(m, r):
    out = m.copy()
    H, W = m.shape
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = np.zeros_like(m)
            ys, yd = slice(max(0, -dy), H - max(0, dy)), slice(max(0, dy), H - max(0, -dy))
            xs, xd = slice(max(0, -dx), W - max(0, dx)), slice(max(0, dx), W - max(0, -dx))
            shifted[yd, xd] = m[ys, xs]
            out |= shifted
    return out


class TestSmoothing:
    def test_zero_sigma_is_identity(self, rng):
        img = rng.random((7, 9))
        out = gaussian_smooth(img, 0.0)
        np.testing.assert_array_equal(out, img)
        assert out is not img

    def test_constant_map_unchanged(self):
        np.testing.assert_allclose(gaussian_smooth(np.full((10, 6), 0.3), 1.7), 0.3, rtol=1e-14)

    def test_impulse_matches_dense_convolution(self):
        img = np.zeros((16, 16))
        img[8, 8] = 1.0
        np.testing.assert_allclose(gaussian_smooth(img, 1.0), dense_blur(img, 1.0), rtol=0, atol=1e-10)

    def test_random_map_near_border_matches_dense_convolution(self, rng):
        img = rng.random((9, 12))
        np.testing.assert_allclose(gaussian_smooth(img, 1.3), dense_blur(img, 1.3), rtol=0, atol=1e-12)

    def test_agrees_with_scipy_reflect_mode(self, rng):
        img = rng.random((16, 16))
        ref = ndimage.gaussian_filter(img, 1.0, mode="reflect", truncate=4.0)
        np.testing.assert_allclose(gaussian_smooth(img, 1.0), ref, rtol=0, atol=1e-12)

    def test_kernel_normalised_and_symmetric(self):
        k = gaussian_kernel(2.0)
        assert k.sum() == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_array_equal(k, k[::-1])

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            gaussian_smooth(np.zeros((3, 3)), -1.0)
        with pytest.raises(ValueError):
            gaussian_smooth(np.zeros((3, 3, 3)), 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.3, 3.0), h=st.integers(1, 12), w=st.integers(1, 12))
def test_smoothing_keeps_range(seed, sigma, h, w):
    img = np.random.default_rng(seed).random((h, w))
    out = gaussian_smooth(img, sigma)
    assert np.all(out >= 0) and out.max() <= img.max() * (1 + 1e-12)


class TestEditMask:
    def test_binary_is_threshold_of_soft(self, rng):
        soft = rng.random((5, 5))
        m = EditMask.from_soft(soft, 0.4)
        np.testing.assert_array_equal(m.binary, soft >= 0.4)

    def test_preservation_is_complement(self):
        b = np.eye(4, dtype=bool)
        np.testing.assert_array_equal(EditMask.from_binary(b).preservation, 1.0 - np.eye(4))

    def test_retau(self, rng):
        m = EditMask.from_soft(rng.random((6, 6)), 0.1)
        assert m.with_tau(0.5).binary.sum() <= m.binary.sum()
        with pytest.raises(ValueError):
            m.with_tau(1.0)


class TestEstimateMask:
    def test_identical_conditions_give_zero_mask(self, mix, sched):
        x0 = sample_scene(2, (7, 4), mix, np.random.default_rng(1))
        m = estimate_mask(x0, Condition(2, (7, 4)), Condition(2, (7, 4)), mix, sched)
        assert not m.soft.any() and not m.binary.any()

    def test_position_edit_iou(self, mix, sched):
        x0 = sample_scene(0, (4, 4), mix, np.random.default_rng(0))
        m = estimate_mask(x0, Condition(0, (4, 4)), Condition(0, (10, 10)), mix, sched)
        union = footprint((4, 4), mix.canvas) | footprint((10, 10), mix.canvas)
        assert iou(m.binary, union) >= 0.5
        assert m.soft.max() == 1.0

    @pytest.mark.parametrize("src,dst,pos", [(0, 1, (4, 4)), (2, 3, (7, 7)), (3, 0, (10, 4))])
    def test_class_edit_stays_near_footprint(self, mix, sched, src, dst, pos):
        x0 = sample_scene(src, pos, mix, np.random.default_rng(src))
        m = estimate_mask(x0, Condition(src, pos), Condition(dst, pos), mix, sched)
        near = dilate(footprint(pos, mix.canvas), int(np.ceil(m.sigma_blur)))
        assert (m.binary & near).sum() >= 0.9 * m.binary.sum()

    def test_seed_order_irrelevant(self, mix, sched):
        x0 = sample_scene(1, (7, 7), mix, np.random.default_rng(5))
        args = (x0, Condition(1, (7, 7)), Condition(1, (4, 10)), mix, sched)
        a = estimate_mask(*args, seeds=[3, 1, 4, 0])
        b = estimate_mask(*args, seeds=[0, 4, 1, 3])
        assert a.soft.tobytes() == b.soft.tobytes()

    def test_average_is_linear_in_seeds(self, mix, sched):
        x0 = sample_scene(1, (7, 7), mix, np.random.default_rng(5))
        co, ce = Condition(1, (7, 7)), Condition(2, (7, 7))
        many = estimate_mask(x0, co, ce, mix, sched, seeds=range(4))
        singles = [noise_difference(x0, co, ce, s, 25, mix, sched) for s in range(4)]
        np.testing.assert_allclose(many.raw, np.mean(singles, axis=0), rtol=1e-14)

    def test_tau_validation(self, mix, sched):
        with pytest.raises(ValueError):
            estimate_mask(mix.means[0], Condition(0, (4, 4)), Condition(1, (4, 4)), mix, sched, tau=0.0)
        with pytest.raises(ValueError):
            estimate_mask(mix.means[0], Condition(0, (4, 4)), Condition(1, (4, 4)), mix, sched, seeds=[])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.01, 0.99), t2=st.floats(0.01, 0.99))
def test_threshold_monotone(seed, t1, t2):
    soft = np.random.default_rng(seed).random((8, 8))
    lo, hi = sorted((t1, t2))
    assert np.all(EditMask.from_soft(soft, hi).binary <= EditMask.from_soft(soft, lo).binary)
