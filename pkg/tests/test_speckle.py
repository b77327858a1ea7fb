"""Multiplicative speckle: unit-mean exponential draws, seeded per row."""

import numpy as np
import pytest

from sarinv.errors import UnsupportedLooks
from sarinv.geometry import ViewConfig
from sarinv.renderer import SarImage, render_image
from sarinv.scene import DsmSurface
from sarinv.speckle import (
    NoiseConfig,
    apply_speckle,
    ks_critical_1pct,
    sample_speckle,
    sample_statistics,
    speckle_statistics,
)


def toy_image(view, value=0.01):
    return SarImage(np.full((view.n_planes, view.n_range_bins), value), view)


class TestNoiseConfig:
    def test_single_look_accepted(self):
        assert NoiseConfig(seed=3, looks=1).looks == 1

    def test_multilook_rejected(self):
        with pytest.raises(UnsupportedLooks):
            NoiseConfig(looks=4)
        with pytest.raises(UnsupportedLooks):
            NoiseConfig(looks=0)


class TestSampleSpeckle:
    def test_shape_and_positivity(self):
        s = sample_speckle((12, 34), seed=1)
        assert s.shape == (12, 34)
        assert np.all(s >= 0)
        assert np.all(np.isfinite(s))

    def test_same_seed_same_noise(self):
        a = sample_speckle((8, 16), seed=5, stream=2)
        b = sample_speckle((8, 16), seed=5, stream=2)
        np.testing.assert_array_equal(a, b)

    def test_distinct_seeds_and_streams(self):
        base = sample_speckle((8, 16), seed=5, stream=2)
        assert not np.array_equal(base, sample_speckle((8, 16), seed=6, stream=2))
        assert not np.array_equal(base, sample_speckle((8, 16), seed=5, stream=3))

    def test_rows_are_independent_of_array_height(self):
        """Row k draws the same values no matter how many rows are requested,
        so per-plane noise does not depend on the stack it sits in."""
        tall = sample_speckle((10, 32), seed=9)
        short = sample_speckle((4, 32), seed=9)
        np.testing.assert_array_equal(tall[:4], short)

    def test_exponential_unit_mean_and_variance(self):
        s = sample_speckle((200, 5000), seed=11)
        n = s.size
        assert s.mean() == pytest.approx(1.0, abs=4.0 / np.sqrt(n))
        # var of the variance estimator for Exp(1) is 8/n
        assert s.var() == pytest.approx(1.0, abs=4.0 * np.sqrt(8.0 / n))

    def test_distribution_passes_ks_at_one_percent(self):
        s = sample_speckle((1000, 1000), seed=2)
        stats = sample_statistics(s)
        assert stats["ks_distance"] < ks_critical_1pct(stats["n"])

    def test_no_serial_correlation(self):
        s = sample_speckle((1000, 1000), seed=13).ravel()
        x = s - s.mean()
        lag1 = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
        assert abs(lag1) < 0.01


class TestApplySpeckle:
    def test_zero_image_stays_zero(self, small_view):
        out = apply_speckle(toy_image(small_view, 0.0), NoiseConfig(seed=1))
        np.testing.assert_array_equal(out.amplitudes, 0.0)

    def test_marks_output_as_noisy(self, small_view):
        out = apply_speckle(toy_image(small_view), NoiseConfig(seed=1))
        assert out.noisy
        assert out.view is small_view

    def test_refuses_to_stack_noise(self, small_view):
        noisy = apply_speckle(toy_image(small_view), NoiseConfig(seed=1))
        with pytest.raises(ValueError):
            apply_speckle(noisy, NoiseConfig(seed=2))

    def test_multiplicative_against_reference(self, small_view):
        clean = toy_image(small_view, 0.02)
        noisy = apply_speckle(clean, NoiseConfig(seed=7))
        ratios = noisy.amplitudes / clean.amplitudes
        np.testing.assert_array_equal(
            noisy.amplitudes, clean.amplitudes * ratios
        )
        assert ratios.std() > 0.5  # genuinely exponential, not a constant

    def test_unbiased_over_many_seeds(self, small_view):
        """Averaging speckled copies recovers the clean image (3 sigma)."""
        clean = toy_image(small_view, 0.05)
        n_seeds = 400
        acc = np.zeros_like(clean.amplitudes)
        for seed in range(n_seeds):
            acc += apply_speckle(clean, NoiseConfig(seed=seed)).amplitudes
        mean_img = acc / n_seeds
        tol = 3.0 * 0.05 / np.sqrt(n_seeds)
        assert np.abs(mean_img.mean() - 0.05) < tol

    def test_streams_decorrelate_views(self, small_view):
        clean = toy_image(small_view, 0.01)
        cfg = NoiseConfig(seed=3)
        a = apply_speckle(clean, cfg, stream=0).amplitudes
        b = apply_speckle(clean, cfg, stream=1).amplitudes
        assert not np.array_equal(a, b)


class TestSpeckleStatistics:
    def test_identity_ratio(self, small_view):
        img = toy_image(small_view, 0.03)
        stats = speckle_statistics(img, img)
        assert stats["mean"] == pytest.approx(1.0)
        assert stats["variance"] == pytest.approx(0.0, abs=1e-15)

    def test_scaling_shows_up_in_the_mean(self, small_view):
        ref = toy_image(small_view, 0.03)
        doubled = SarImage(2.0 * ref.amplitudes, small_view)
        assert speckle_statistics(doubled, ref)["mean"] == pytest.approx(2.0)

    def test_speckled_render_looks_exponential(self):
        surf = DsmSurface(np.full((16, 16), 0.3))
        view = ViewConfig.for_scene(0.0, np.pi / 4, n_planes=48, n_range_bins=256,
                                    n_rays=32)
        clean = render_image(surf, None, 0.05, view)
        noisy = apply_speckle(clean, NoiseConfig(seed=21))
        stats = speckle_statistics(noisy, clean)
        assert stats["ks_distance"] < ks_critical_1pct(stats["n"])
        assert stats["mean"] == pytest.approx(1.0, abs=0.05)

    def test_dark_pixels_are_excluded(self, small_view):
        ref_arr = np.full((small_view.n_planes, small_view.n_range_bins), 0.02)
        ref_arr[0, :] = 0.0
        ref = SarImage(ref_arr, small_view)
        noisy = apply_speckle(ref, NoiseConfig(seed=2))
        stats = speckle_statistics(noisy, ref)
        assert stats["n"] == ref_arr.size - small_view.n_range_bins

    def test_shape_mismatch_rejected(self, small_view):
        img = toy_image(small_view)
        other = ViewConfig.for_scene(0.0, np.pi / 4, n_planes=2, n_range_bins=8,
                                     n_rays=4)
        with pytest.raises(ValueError):
            speckle_statistics(img, toy_image(other))


class TestSampleStatistics:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sample_statistics(np.array([]))

    def test_ks_detects_wrong_distribution(self, rng):
        uniform = rng.random(100_000)
        stats = sample_statistics(uniform)
        assert stats["ks_distance"] > ks_critical_1pct(stats["n"])

    def test_critical_value_scaling(self):
        assert ks_critical_1pct(100) == pytest.approx(0.16276, rel=1e-3)
        assert ks_critical_1pct(1_000_000) == pytest.approx(1.6276e-3, rel=1e-3)
