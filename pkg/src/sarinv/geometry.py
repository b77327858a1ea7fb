"""Acquisition geometry: azimuth planes, in-plane rays, fixed range sampling.

The platform track is a horizontal line whose direction (the azimuth
heading) is the common normal of all azimuth planes. Inside each plane,
rays share one downward direction v whose zenith angle is the incidence
angle; w is the in-plane vector orthogonal to v with positive z. Ray
origins sit on a line at `standoff` above the scene and sweep along w,
while range bins sample fixed distances along v. Far-field parallel-ray
geometry: spaceborne SAR wavefronts are effectively planar over a
scene-sized footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometry

__all__ = ["ViewConfig", "AzimuthPlane", "build_planes", "sample_rays", "march_points"]

# Corners of the scene cube [0,1]^3.
CUBE_CORNERS = np.array(
    [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
)
CUBE_CENTER = np.array([0.5, 0.5, 0.5])

_COVERAGE_TOL = 1e-9


def _basis(heading: float, incidence: float):
    """Orthonormal frame of a view: (heading a, cross-track t, ray v, in-plane w)."""
    a = np.array([math.cos(heading), math.sin(heading), 0.0])
    t = np.array([-math.sin(heading), math.cos(heading), 0.0])
    si, ci = math.sin(incidence), math.cos(incidence)
    v = np.array([si * t[0], si * t[1], -ci])
    w = np.array([ci * t[0], ci * t[1], si])
    return a, t, v, w


@dataclass(frozen=True)
class ViewConfig:
    """One SAR acquisition geometry.

    range_origin/range_step define the distance sampling d_i = range_origin
    + i * range_step along v, measured from the ray-origin line; the swept
    slab must cover the projection of the scene cube onto v.
    """

    azimuth_heading: float  # radians, flight track direction on the ground
    incidence: float        # radians in (0, pi/2), ray angle from vertical
    n_planes: int
    n_range_bins: int
    range_origin: float
    range_step: float
    n_rays: int
    standoff: float = 1.0   # ray-origin line height above the cube top

    def __post_init__(self):
        if not (0.0 < self.incidence < math.pi / 2):
            raise InvalidGeometry(f"incidence must be in (0, pi/2), got {self.incidence}")
        if min(self.n_planes, self.n_range_bins, self.n_rays) < 1:
            raise InvalidGeometry("n_planes, n_range_bins and n_rays must be >= 1")
        if self.range_step <= 0:
            raise InvalidGeometry("range_step must be positive")
        d_lo, d_hi = self._scene_depth_range()
        slab_hi = self.range_origin + self.n_range_bins * self.range_step
        if self.range_origin > d_lo + _COVERAGE_TOL or slab_hi < d_hi - _COVERAGE_TOL:
            raise InvalidGeometry(
                "range slab [%g, %g] does not cover the scene depth span [%g, %g]"
                % (self.range_origin, slab_hi, d_lo, d_hi)
            )

    @property
    def origin_distance(self) -> float:
        """Distance from the ray-origin line to the cube-center plane point along v."""
        return (0.5 + self.standoff) / math.cos(self.incidence)

    def _scene_depth_range(self):
        """Min/max distance along v from the origin line to the cube corners.

        Identical for every azimuth plane of the view: plane anchors differ
        only along the heading direction, which is orthogonal to v.
        """
        _, _, v, _ = _basis(self.azimuth_heading, self.incidence)
        proj = (CUBE_CORNERS - CUBE_CENTER) @ v + self.origin_distance
        return float(proj.min()), float(proj.max())

    def _scene_sweep_range(self):
        """Min/max coordinate along w of the cube corners (shared by all planes)."""
        _, _, _, w = _basis(self.azimuth_heading, self.incidence)
        proj = (CUBE_CORNERS - CUBE_CENTER) @ w
        return float(proj.min()), float(proj.max())

    @classmethod
    def for_scene(
        cls,
        azimuth_heading: float,
        incidence: float,
        n_planes: int = 64,
        n_range_bins: int = 256,
        n_rays: int = 256,
        standoff: float = 1.0,
    ) -> "ViewConfig":
        """Derive the range sampling that exactly spans the scene cube."""
        if not (0.0 < incidence < math.pi / 2):
            raise InvalidGeometry(f"incidence must be in (0, pi/2), got {incidence}")
        if min(n_planes, n_range_bins, n_rays) < 1:
            raise InvalidGeometry("n_planes, n_range_bins and n_rays must be >= 1")
        _, _, v, _ = _basis(azimuth_heading, incidence)
        d_ref = (0.5 + standoff) / math.cos(incidence)
        proj = (CUBE_CORNERS - CUBE_CENTER) @ v + d_ref
        d_lo, d_hi = float(proj.min()), float(proj.max())
        step = (d_hi - d_lo) / n_range_bins
        return cls(
            azimuth_heading=azimuth_heading,
            incidence=incidence,
            n_planes=n_planes,
            n_range_bins=n_range_bins,
            range_origin=d_lo,
            range_step=step,
            n_rays=n_rays,
            standoff=standoff,
        )

    def distances(self) -> np.ndarray:
        """The fixed range sampling (d_i), shared by every ray of the view."""
        return self.range_origin + self.range_step * np.arange(self.n_range_bins)


@dataclass(frozen=True)
class AzimuthPlane:
    """One zero-doppler plane: all its rays share the direction v."""

    plane_index: int
    origin_line_point: np.ndarray  # center of the ray-origin line
    v: np.ndarray                  # unit, downward (v.z < 0)
    w: np.ndarray                  # unit, in-plane, orthogonal to v, w.z > 0


def build_planes(view: ViewConfig) -> list[AzimuthPlane]:
    """Parallel vertical planes spanning the cube footprint along the heading.

    Plane positions are cell-centered over the footprint span, so a single
    plane bisects the footprint.
    """
    a, _, v, w = _basis(view.azimuth_heading, view.incidence)
    foot = CUBE_CORNERS[:, :2] @ a[:2]
    lo, hi = float(foot.min()), float(foot.max())
    pitch = (hi - lo) / view.n_planes
    center_a = float(CUBE_CENTER @ a)
    planes = []
    for k in range(view.n_planes):
        pos = lo + (k + 0.5) * pitch
        anchor = CUBE_CENTER + (pos - center_a) * a
        origin = anchor - view.origin_distance * v
        planes.append(AzimuthPlane(k, origin, v.copy(), w.copy()))
    return planes


def sample_rays(
    plane: AzimuthPlane, view: ViewConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Ray origins along w, covering the scene footprint within the plane.

    Base origins are evenly spaced (cell-centered). With a random source,
    each origin is displaced along w by a normal draw scaled to half the
    inter-ray spacing, so the jitter acts as stratified anti-aliasing and
    never moves an origin out of its plane.
    """
    s_lo, s_hi = view._scene_sweep_range()
    spacing = (s_hi - s_lo) / view.n_rays
    s = s_lo + (np.arange(view.n_rays) + 0.5) * spacing
    if rng is not None:
        s = s + rng.standard_normal(view.n_rays) * (0.5 * spacing)
    return plane.origin_line_point[None, :] + s[:, None] * plane.w[None, :]


def march_points(origin: np.ndarray, v: np.ndarray, view: ViewConfig):
    """Sample points x_i = origin + d_i * v at the view's fixed distances.

    The distances are never perturbed: the sampling step along rays is set
    by the range sampling of the data.
    """
    d = view.distances()
    origin = np.asarray(origin, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return origin[None, :] + d[:, None] * v[None, :], d
