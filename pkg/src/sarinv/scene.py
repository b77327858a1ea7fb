"""Optimizable scene representation: heightfield, specularity map, sharpness.

The scene lives in the unit cube. A raster of cell-center altitudes in
[0, 1] defines a surface z = h(x, y) through bilinear interpolation, and
the implicit function F(p) = p.z - h(p.x, p.y) is positive above the
surface and negative below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DsmSurface",
    "SpecularityMap",
    "SharpnessParam",
    "height_at",
    "implicit_value",
    "normal_at",
    "softplus",
    "sigmoid",
]


def softplus(x):
    """Numerically stable log(1 + exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def sigmoid(x):
    """Derivative of softplus."""
    x = np.asarray(x, dtype=np.float64)
    pos = 1.0 / (1.0 + np.exp(-np.maximum(x, 0.0)))
    ex = np.exp(np.minimum(x, 0.0))
    neg = ex / (1.0 + ex)
    return np.where(x >= 0, pos, neg)


@dataclass
class DsmSurface:
    """Rasterized heightfield over the unit square.

    heights[iy, ix] is the altitude at the center of cell (ix, iy), i.e. at
    (x, y) = ((ix + 0.5) / width, (iy + 0.5) / height_cells). Queries outside
    the cell-center extent clamp to the border cell (edge extension).
    """

    heights: np.ndarray

    def __post_init__(self):
        self.heights = np.ascontiguousarray(self.heights, dtype=np.float64)
        if self.heights.ndim != 2:
            raise ValueError("heights must be a 2D grid")
        if self.width < 2 or self.height_cells < 2:
            raise ValueError("bilinear interpolation needs at least a 2x2 grid")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("heights must be finite")

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height_cells(self) -> int:
        return self.heights.shape[0]

    @property
    def cell_size(self) -> float:
        """Scene units per cell along x (the ground-pixel size)."""
        return 1.0 / self.width

    @classmethod
    def flat(cls, width: int, height_cells: int | None = None, value: float = 0.5) -> "DsmSurface":
        if height_cells is None:
            height_cells = width
        return cls(np.full((height_cells, width), float(value)))

    def clamp(self) -> None:
        """Clip heights into [0, 1] in place (applied after optimizer steps)."""
        np.clip(self.heights, 0.0, 1.0, out=self.heights)

    def copy(self) -> "DsmSurface":
        return DsmSurface(self.heights.copy())


@dataclass
class SpecularityMap:
    """Per-cell reflectance exponent, raster layout identical to DsmSurface.

    The exponent is kept >= 1 through theta = 1 + softplus(raw); raw is the
    unconstrained quantity the optimizer updates.
    """

    raw: np.ndarray

    def __post_init__(self):
        self.raw = np.ascontiguousarray(self.raw, dtype=np.float64)
        if self.raw.ndim != 2:
            raise ValueError("raw must be a 2D grid")

    @property
    def theta(self) -> np.ndarray:
        return 1.0 + softplus(self.raw)

    @property
    def dtheta_draw(self) -> np.ndarray:
        """Elementwise d(theta)/d(raw)."""
        return sigmoid(self.raw)

    @classmethod
    def near_lambertian(cls, shape: tuple[int, int], raw_value: float = -5.0) -> "SpecularityMap":
        """Map initialized just above theta = 1 (theta = 1 is the open limit raw -> -inf)."""
        return cls(np.full(shape, float(raw_value)))

    @classmethod
    def from_theta(cls, theta: np.ndarray) -> "SpecularityMap":
        theta = np.asarray(theta, dtype=np.float64)
        if np.any(theta <= 1.0):
            raise ValueError("theta must be > 1 to invert the softplus reparameterization")
        # softplus^-1(t) = log(expm1(t))
        return cls(np.log(np.expm1(theta - 1.0)))

    def copy(self) -> "SpecularityMap":
        return SpecularityMap(self.raw.copy())


@dataclass
class SharpnessParam:
    """Transition width of the Laplace CDF, stored as beta = exp(raw) > 0."""

    raw: float = field(default=float(np.log(0.05)))

    @property
    def beta(self) -> float:
        return float(np.exp(self.raw))

    @classmethod
    def from_beta(cls, beta: float) -> "SharpnessParam":
        if beta <= 0:
            raise ValueError("beta must be positive")
        return cls(float(np.log(beta)))

    def copy(self) -> "SharpnessParam":
        return SharpnessParam(self.raw)


def _grid_coords(n: int, coord, extent: float = 1.0):
    """Map scene coordinate to (cell index, fraction, slope scale).

    The slope scale is n/extent where the query is inside the cell-center
    extent and 0 where it clamps (edge extension has zero slope outside).
    """
    u_raw = np.asarray(coord, dtype=np.float64) * (n / extent) - 0.5
    inside = (u_raw >= 0.0) & (u_raw <= n - 1.0)
    u = np.clip(u_raw, 0.0, n - 1.0)
    i0 = np.minimum(u.astype(np.int64), n - 2)
    f = u - i0
    scale = np.where(inside, n / extent, 0.0)
    return i0, f, scale


def _bilinear(surface: DsmSurface, x, y):
    """Interpolated height and its analytic slopes (dh/dx, dh/dy)."""
    h_grid = surface.heights
    ix0, fx, ax = _grid_coords(surface.width, x)
    iy0, fy, ay = _grid_coords(surface.height_cells, y)
    h00 = h_grid[iy0, ix0]
    h10 = h_grid[iy0, ix0 + 1]
    h01 = h_grid[iy0 + 1, ix0]
    h11 = h_grid[iy0 + 1, ix0 + 1]
    ha = h00 + fx * (h10 - h00)
    hb = h01 + fx * (h11 - h01)
    h = ha + fy * (hb - ha)
    hx = ((1.0 - fy) * (h10 - h00) + fy * (h11 - h01)) * ax
    hy = ((1.0 - fx) * (h01 - h00) + fx * (h11 - h10)) * ay
    return h, hx, hy


def height_at(surface: DsmSurface, x, y):
    """Bilinear surface altitude at (x, y); scalars or arrays broadcast."""
    h, _, _ = _bilinear(surface, x, y)
    if np.isscalar(x) and np.isscalar(y):
        return float(h)
    return h


def implicit_value(surface: DsmSurface, p):
    """F(p) = p.z - h(p.x, p.y); positive above the surface, negative below."""
    p = np.asarray(p, dtype=np.float64)
    h, _, _ = _bilinear(surface, p[..., 0], p[..., 1])
    out = p[..., 2] - h
    if out.ndim == 0:
        return float(out)
    return out


def normal_at(surface: DsmSurface, x, y):
    """Unit upward normal of the bilinear patch at (x, y).

    The gradient of z - h(x, y) is (-dh/dx, -dh/dy, 1); it is normalized so
    the reflectance dot product is a pure cosine.
    """
    _, hx, hy = _bilinear(surface, x, y)
    n = np.stack(np.broadcast_arrays(-hx, -hy, np.ones_like(hx + hy)), axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return n
