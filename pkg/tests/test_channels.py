"""Channel computation: LUV, gradients, orientation bins, aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldcf.channels import (
    ChannelConfig,
    ChannelStack,
    aggregate,
    compute_channels,
    gradients,
    load_stack,
    orientation_channels,
    rgb_to_luv,
    save_stack,
)
from ldcf.errors import DataError, InvalidFactor, NotColorImage

from conftest import make_image, make_stack


class TestLuv:
    def test_white_and_black(self):
        luv = rgb_to_luv(make_image(np.full((2, 2, 3), 255)))
        # white: L* = 100, u* = v* = 0 before rescaling
        assert luv[0] == pytest.approx(np.full((2, 2), 1.0), abs=1e-6)
        assert luv[1] == pytest.approx(np.full((2, 2), 134 / 354), abs=1e-6)
        assert luv[2] == pytest.approx(np.full((2, 2), 140 / 262), abs=1e-6)
        black = rgb_to_luv(make_image(np.zeros((2, 2, 3))))
        assert black[0] == pytest.approx(np.zeros((2, 2)), abs=1e-12)

    def test_primary_red_reference(self):
        # classic CIELUV values for sRGB red under D65
        luv = rgb_to_luv(make_image(np.full((1, 1, 3), [255, 0, 0])))
        lstar = luv[0, 0, 0] * 100
        ustar = luv[1, 0, 0] * 354 - 134
        vstar = luv[2, 0, 0] * 262 - 140
        assert lstar == pytest.approx(53.24, abs=0.05)
        assert ustar == pytest.approx(175.01, abs=0.2)
        assert vstar == pytest.approx(37.75, abs=0.2)

    def test_range_bounds(self, noise_rgb):
        luv = rgb_to_luv(noise_rgb)
        assert luv.min() >= 0.0 and luv.max() <= 1.0

    def test_gray_input_rejected(self):
        with pytest.raises(NotColorImage):
            rgb_to_luv(make_image(np.zeros((4, 4))))


class TestGradients:
    def test_linear_ramp_exact(self):
        y, x = np.mgrid[0:8, 0:8].astype(np.float64)
        plane = 3.0 * x + 4.0 * y
        mag, ori = gradients(plane)
        inner = mag[1:-1, 1:-1]
        # central differences recover the true gradient away from borders
        np.testing.assert_allclose(inner, 5.0, atol=1e-12)
        np.testing.assert_allclose(
            ori[1:-1, 1:-1], np.arctan2(4.0, 3.0) % np.pi, atol=1e-12
        )

    def test_constant_plane_zero(self):
        mag, _ = gradients(np.full((6, 6), 7.0))
        np.testing.assert_array_equal(mag, 0.0)


class TestOrientationBins:
    def test_mass_conservation(self, rng):
        mag = rng.random((12, 12))
        ori = rng.random((12, 12)) * np.pi
        bins = orientation_channels(mag, ori, 6)
        np.testing.assert_allclose(bins.sum(axis=0), mag, atol=1e-12)

    def test_aligned_angle_single_bin(self):
        # an orientation exactly at a bin center lands wholly in that bin
        mag = np.ones((4, 4))
        ori = np.full((4, 4), 2 * np.pi / 6)  # center of bin 2 of 6
        bins = orientation_channels(mag, ori, 6)
        np.testing.assert_allclose(bins[2], 1.0, atol=1e-12)
        assert bins[[0, 1, 3, 4, 5]].max() < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), nbins=st.sampled_from([4, 6, 9]))
    def test_mass_conserved_any_bins(self, seed, nbins):
        r = np.random.Generator(np.random.Philox(seed))
        mag = r.random((6, 6))
        ori = r.random((6, 6)) * np.pi
        bins = orientation_channels(mag, ori, nbins)
        assert bins.shape[0] == nbins
        np.testing.assert_allclose(bins.sum(axis=0), mag, atol=1e-10)


class TestAggregate:
    def test_block_mean_oracle(self):
        plane = np.arange(16, dtype=np.float64).reshape(4, 4)
        out = aggregate(make_stack(plane), 2)
        expect = np.array([[2.5, 4.5], [10.5, 12.5]])
        np.testing.assert_allclose(out.planes[0], expect)
        assert out.shrink == 2

    def test_composition(self, rng):
        plane = rng.random((8, 8))
        once = aggregate(make_stack(plane), 4)
        twice = aggregate(aggregate(make_stack(plane), 2), 2)
        np.testing.assert_allclose(once.planes, twice.planes, atol=1e-12)
        assert once.shrink == twice.shrink == 4

    def test_factor_one_identity(self, rng):
        st_ = make_stack(rng.random((6, 6)))
        out = aggregate(st_, 1)
        np.testing.assert_array_equal(out.planes, st_.planes)

    def test_indivisible_crops(self, rng):
        # trailing rows/cols beyond a factor multiple are dropped
        plane = rng.random((7, 6))
        out = aggregate(make_stack(plane), 4)
        assert out.planes.shape == (1, 1, 1)
        np.testing.assert_allclose(out.planes[0, 0, 0], plane[:4, :4].mean())

    def test_bad_factor_rejected(self, rng):
        with pytest.raises(InvalidFactor):
            aggregate(make_stack(rng.random((6, 6))), 0)


class TestComputeChannels:
    def test_ten_planes_and_labels(self, gradient_rgb):
        stack = compute_channels(gradient_rgb, ChannelConfig(shrink=2))
        assert stack.planes.shape[0] == 10
        assert stack.labels[:3] == ("L", "U", "V")
        assert stack.labels[3] == "M"
        assert stack.labels[4:] == ("O1", "O2", "O3", "O4", "O5", "O6")
        assert stack.shrink == 2
        assert stack.height == gradient_rgb.height // 2

    def test_shrink_one(self, gradient_rgb):
        stack = compute_channels(gradient_rgb, ChannelConfig(shrink=1))
        assert stack.height == gradient_rgb.height

    def test_deterministic(self, noise_rgb):
        a = compute_channels(noise_rgb, ChannelConfig())
        b = compute_channels(noise_rgb, ChannelConfig())
        np.testing.assert_array_equal(a.planes, b.planes)

    def test_bad_shrink(self):
        with pytest.raises(InvalidFactor):
            ChannelConfig(shrink=3)


class TestStackIo:
    def test_roundtrip_single_precision(self, gradient_rgb, tmp_path):
        # the container stores float32; one save/load is the only loss
        stack = compute_channels(gradient_rgb, ChannelConfig())
        save_stack(stack, tmp_path / "s.chn")
        back = load_stack(tmp_path / "s.chn")
        np.testing.assert_array_equal(
            back.planes, stack.planes.astype("<f4").astype(np.float64)
        )
        assert back.labels == stack.labels
        assert back.shrink == stack.shrink
        save_stack(back, tmp_path / "s2.chn")
        again = load_stack(tmp_path / "s2.chn")
        np.testing.assert_array_equal(again.planes, back.planes)

    def test_unique_labels_enforced(self):
        with pytest.raises(DataError):
            ChannelStack(np.zeros((2, 3, 3)), ("a", "a"))
