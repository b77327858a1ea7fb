"""Heightfield queries: bilinear interpolation, implicit values, normals."""

import numpy as np
import pytest

from sarinv.scene import (
    DsmSurface,
    SharpnessParam,
    SpecularityMap,
    height_at,
    implicit_value,
    normal_at,
    sigmoid,
    softplus,
)


def bilinear_oracle(grid, x, y):
    """Textbook bilinear interpolation at cell centers, written independently."""
    ny, nx = grid.shape
    u = np.clip(x * nx - 0.5, 0.0, nx - 1.0)
    v = np.clip(y * ny - 0.5, 0.0, ny - 1.0)
    i = min(int(u), nx - 2)
    j = min(int(v), ny - 2)
    fu, fv = u - i, v - j
    return (
        grid[j, i] * (1 - fu) * (1 - fv)
        + grid[j, i + 1] * fu * (1 - fv)
        + grid[j + 1, i] * (1 - fu) * fv
        + grid[j + 1, i + 1] * fu * fv
    )


def pyramid_heights(size, peak=0.35, half_width=0.4):
    i = np.arange(size)
    c = (2 * i + 1 - size) / (2 * size)
    dx, dy = np.meshgrid(c, c)
    rim = np.maximum(np.abs(dx), np.abs(dy))
    return peak * np.clip(1.0 - rim / half_width, 0.0, 1.0)


class TestHeightAt:
    def test_flat_surface_constant_everywhere(self, rng):
        surf = DsmSurface(np.full((8, 8), 0.3))
        for _ in range(20):
            x, y = rng.random(2)
            assert height_at(surf, x, y) == pytest.approx(0.3, abs=1e-15)

    def test_linear_midpoint_between_columns(self):
        surf = DsmSurface(np.array([[0.0, 1.0], [0.0, 1.0]]))
        assert height_at(surf, 0.5, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_matches_independent_bilinear_oracle(self, rng):
        grid = rng.random((8, 8))
        surf = DsmSurface(grid)
        for _ in range(10):
            x, y = rng.random(2)
            assert height_at(surf, x, y) == pytest.approx(
                bilinear_oracle(grid, x, y), abs=1e-12
            )

    def test_exact_at_cell_centers(self, rng):
        grid = rng.random((6, 9))
        surf = DsmSurface(grid)
        for j in range(6):
            for i in range(9):
                x = (i + 0.5) / 9
                y = (j + 0.5) / 6
                assert height_at(surf, x, y) == pytest.approx(grid[j, i], abs=1e-14)

    def test_edge_extension_clamps_to_border(self, rng):
        grid = rng.random((5, 5))
        surf = DsmSurface(grid)
        # beyond the last cell center the value freezes at the border cell
        assert height_at(surf, 0.0, 0.5) == pytest.approx(
            height_at(surf, 0.1 / 5, 0.5), abs=1e-14
        )

    def test_linear_along_grid_aligned_segment(self, rng):
        """Within one cell the interpolant is exactly linear along x."""
        grid = rng.random((4, 4))
        surf = DsmSurface(grid)
        y = 0.4
        x0, x1 = 0.40, 0.45  # both inside the same cell column
        h0 = height_at(surf, x0, y)
        h1 = height_at(surf, x1, y)
        hm = height_at(surf, 0.5 * (x0 + x1), y)
        assert hm == pytest.approx(0.5 * (h0 + h1), abs=1e-13)

    def test_array_queries_match_scalars(self, rng):
        grid = rng.random((8, 8))
        surf = DsmSurface(grid)
        xs, ys = rng.random(16), rng.random(16)
        hs = height_at(surf, xs, ys)
        for k in range(16):
            assert hs[k] == pytest.approx(height_at(surf, xs[k], ys[k]), abs=0)


class TestImplicitValue:
    def test_on_surface_point_is_zero(self):
        surf = DsmSurface(np.full((8, 8), 0.3))
        assert implicit_value(surf, np.array([0.5, 0.5, 0.3])) == pytest.approx(0.0, abs=1e-15)

    def test_offset_equals_z_minus_height(self):
        surf = DsmSurface(np.full((8, 8), 0.3))
        assert implicit_value(surf, np.array([0.1, 0.9, 0.8])) == pytest.approx(0.5, abs=1e-15)

    def test_zero_on_pyramid_faces(self, rng):
        """Points constructed on a planar face evaluate to |F| < 1e-9."""
        size = 64
        surf = DsmSurface(pyramid_heights(size))
        # sample strictly inside the +x-facing flank, away from ridges, where
        # the surface is the plane h = 0.35 * (1 - (x - 0.5) / 0.4)
        for _ in range(50):
            x = 0.5 + 0.15 + 0.15 * rng.random()
            y = 0.5 + (rng.random() - 0.5) * 0.1
            z = 0.35 * (1.0 - (x - 0.5) / 0.4)
            assert abs(implicit_value(surf, np.array([x, y, z]))) < 1e-9

    def test_sign_convention(self, bumpy_surface, rng):
        for _ in range(20):
            x, y = rng.random(2)
            h = height_at(bumpy_surface, x, y)
            assert implicit_value(bumpy_surface, np.array([x, y, h + 0.1])) > 0
            assert implicit_value(bumpy_surface, np.array([x, y, h - 0.1])) < 0


class TestNormalAt:
    def test_flat_surface_points_up(self, flat_surface):
        n = normal_at(flat_surface, 0.3, 0.7)
        np.testing.assert_allclose(n, [0.0, 0.0, 1.0], atol=1e-15)

    def test_unit_ramp_normal(self):
        """h(x, y) = x has slope 1, so the normal is (-1, 0, 1)/sqrt(2)."""
        size = 16
        x_centers = (np.arange(size) + 0.5) / size
        surf = DsmSurface(np.tile(x_centers, (size, 1)))
        n = normal_at(surf, 0.5, 0.5)
        np.testing.assert_allclose(n, np.array([-1.0, 0.0, 1.0]) / np.sqrt(2), atol=1e-12)

    def test_matches_finite_differences_of_height(self, rng):
        grid = rng.random((8, 8))
        surf = DsmSurface(grid)
        step = 1e-5
        checked = 0
        while checked < 20:
            x, y = rng.random(2)
            # stay away from cell boundaries so the difference quotient
            # does not straddle a C0 kink of the bilinear patchwork
            fx = (x * 8 - 0.5) % 1.0
            fy = (y * 8 - 0.5) % 1.0
            if min(fx, 1 - fx, fy, 1 - fy) < 1e-3 or not (0.1 < x < 0.9 and 0.1 < y < 0.9):
                continue
            hx = (height_at(surf, x + step, y) - height_at(surf, x - step, y)) / (2 * step)
            hy = (height_at(surf, x, y + step) - height_at(surf, x, y - step)) / (2 * step)
            expect = np.array([-hx, -hy, 1.0])
            expect /= np.linalg.norm(expect)
            np.testing.assert_allclose(normal_at(surf, x, y), expect, rtol=1e-5, atol=1e-7)
            checked += 1

    def test_z_component_always_positive(self, rng):
        grid = rng.random((8, 8))
        surf = DsmSurface(grid)
        xs, ys = rng.random(100), rng.random(100)
        assert np.all(normal_at(surf, xs, ys)[..., 2] > 0)


class TestDsmSurface:
    def test_shape_and_cell_size(self):
        surf = DsmSurface(np.zeros((4, 8)))
        assert surf.width == 8
        assert surf.height_cells == 4
        assert surf.cell_size == pytest.approx(1.0 / 8)

    def test_rejects_tiny_grids(self):
        with pytest.raises(ValueError):
            DsmSurface(np.zeros((1, 5)))
        with pytest.raises(ValueError):
            DsmSurface(np.zeros(5))

    def test_rejects_non_finite(self):
        grid = np.zeros((4, 4))
        grid[1, 2] = np.nan
        with pytest.raises(ValueError):
            DsmSurface(grid)

    def test_clamp(self):
        surf = DsmSurface(np.array([[-0.5, 0.5], [2.0, 1.0]]))
        surf.clamp()
        np.testing.assert_array_equal(surf.heights, [[0.0, 0.5], [1.0, 1.0]])


class TestSpecularityMap:
    def test_theta_at_least_one(self, rng):
        smap = SpecularityMap(rng.standard_normal((6, 6)) * 10)
        assert np.all(smap.theta >= 1.0)

    def test_monotone_in_raw(self):
        raw = np.linspace(-20, 20, 100).reshape(10, 10)
        theta = SpecularityMap(raw).theta
        assert np.all(np.diff(theta.ravel()) > 0)

    def test_large_negative_raw_approaches_one(self):
        smap = SpecularityMap(np.full((2, 2), -40.0))
        np.testing.assert_allclose(smap.theta, 1.0, atol=1e-12)

    def test_from_theta_round_trip(self, rng):
        theta = 1.0 + np.exp(rng.standard_normal((5, 5)))
        smap = SpecularityMap.from_theta(theta)
        np.testing.assert_allclose(smap.theta, theta, rtol=1e-12)

    def test_from_theta_rejects_at_most_one(self):
        with pytest.raises(ValueError):
            SpecularityMap.from_theta(np.full((2, 2), 1.0))

    def test_derivative_matches_finite_differences(self):
        raw = np.linspace(-5, 5, 25).reshape(5, 5)
        smap = SpecularityMap(raw)
        h = 1e-6
        fd = (SpecularityMap(raw + h).theta - SpecularityMap(raw - h).theta) / (2 * h)
        np.testing.assert_allclose(smap.dtheta_draw, fd, atol=1e-9)


class TestSharpnessParam:
    def test_from_beta_round_trip(self):
        p = SharpnessParam.from_beta(0.05)
        assert p.beta == pytest.approx(0.05, rel=1e-15)

    def test_positive_for_any_raw(self):
        assert SharpnessParam(raw=-100.0).beta > 0
        assert SharpnessParam(raw=10.0).beta > 0

    def test_rejects_non_positive_beta(self):
        with pytest.raises(ValueError):
            SharpnessParam.from_beta(0.0)
        with pytest.raises(ValueError):
            SharpnessParam.from_beta(-1.0)


class TestStableActivations:
    def test_softplus_extremes(self):
        assert softplus(800.0) == pytest.approx(800.0)
        assert softplus(-800.0) == pytest.approx(0.0, abs=1e-300)
        assert np.isfinite(softplus(np.array([-1e4, 0.0, 1e4]))).all()

    def test_sigmoid_is_softplus_slope(self):
        x = np.linspace(-30, 30, 61)
        h = 1e-6
        fd = (softplus(x + h) - softplus(x - h)) / (2 * h)
        np.testing.assert_allclose(sigmoid(x), fd, atol=1e-9)
