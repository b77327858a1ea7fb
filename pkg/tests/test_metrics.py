"""Altitude error metrics in ground-pixel units."""

import numpy as np
import pytest

from sarinv.errors import ShapeMismatch
from sarinv.metrics import altitude_mae, altitude_median, altitude_rmse, image_mse
from sarinv.renderer import SarImage
from sarinv.scene import DsmSurface


class TestAltitudeErrors:
    def test_zero_for_identical_surfaces(self, bumpy_surface):
        other = DsmSurface(bumpy_surface.heights.copy())
        assert altitude_rmse(bumpy_surface, other) == 0.0
        assert altitude_mae(bumpy_surface, other) == 0.0
        assert altitude_median(bumpy_surface, other) == 0.0

    def test_uniform_offset_in_pixel_units(self):
        """A constant height offset of one cell size reads as one pixel."""
        size = 16
        a = DsmSurface(np.full((size, size), 0.5))
        b = DsmSurface(np.full((size, size), 0.5 + 1.0 / size))
        assert altitude_rmse(a, b) == pytest.approx(1.0, rel=1e-12)
        assert altitude_mae(a, b) == pytest.approx(1.0, rel=1e-12)
        assert altitude_median(a, b) == pytest.approx(1.0, rel=1e-12)

    def test_matches_direct_formulas(self, rng):
        size = 8
        ha = rng.random((size, size))
        hb = rng.random((size, size))
        diff = (ha - hb) * size
        a, b = DsmSurface(ha), DsmSurface(hb)
        assert altitude_rmse(a, b) == pytest.approx(
            np.sqrt(np.mean(diff**2)), rel=1e-12
        )
        assert altitude_mae(a, b) == pytest.approx(np.mean(np.abs(diff)), rel=1e-12)
        assert altitude_median(a, b) == pytest.approx(
            np.median(np.abs(diff)), rel=1e-12
        )

    def test_symmetric_in_arguments(self, rng):
        a = DsmSurface(rng.random((6, 6)))
        b = DsmSurface(rng.random((6, 6)))
        assert altitude_rmse(a, b) == altitude_rmse(b, a)
        assert altitude_mae(a, b) == altitude_mae(b, a)

    def test_rmse_dominates_mae(self, rng):
        a = DsmSurface(rng.random((10, 10)))
        b = DsmSurface(rng.random((10, 10)))
        assert altitude_rmse(a, b) >= altitude_mae(a, b)
        assert altitude_mae(a, b) >= 0.0

    def test_median_robust_to_one_outlier(self):
        size = 16
        ha = np.full((size, size), 0.5)
        hb = ha.copy()
        hb[3, 3] += 0.4
        a, b = DsmSurface(ha), DsmSurface(hb)
        assert altitude_median(a, b) == 0.0
        assert altitude_rmse(a, b) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            altitude_rmse(DsmSurface(np.zeros((4, 4))), DsmSurface(np.zeros((8, 8))))

    def test_accepts_raw_arrays(self, rng):
        ha = rng.random((8, 8))
        hb = rng.random((8, 8))
        assert altitude_rmse(ha, hb) == altitude_rmse(DsmSurface(ha), DsmSurface(hb))


class TestImageMse:
    def test_zero_for_identical(self, small_view, rng):
        arr = rng.random((small_view.n_planes, small_view.n_range_bins)) * 0.01
        img = SarImage(arr, small_view)
        assert image_mse(img, SarImage(arr.copy(), small_view)) == 0.0

    def test_matches_mean_square(self, small_view, rng):
        a = rng.random((small_view.n_planes, small_view.n_range_bins)) * 0.01
        b = rng.random((small_view.n_planes, small_view.n_range_bins)) * 0.01
        expect = float(np.mean((a - b) ** 2))
        got = image_mse(SarImage(a, small_view), SarImage(b, small_view))
        assert got == pytest.approx(expect, rel=1e-12)

    def test_mixed_image_and_array(self, small_view, rng):
        a = rng.random((small_view.n_planes, small_view.n_range_bins)) * 0.01
        img = SarImage(a, small_view)
        assert image_mse(img, a) == 0.0
