"""Forward SAR rendering: pseudo-density, transmittance and plane/image synthesis.

A range profile for one azimuth plane is the across-ray mean of
T * alpha * reflectance per range bin, where opacity alpha comes from a
Laplace-CDF pseudo-density of the signed height residual and T is the
running transmittance along each ray. Every render of a plane also
returns the tape of intermediate values needed by the reverse pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ShapeMismatch
from .geometry import AzimuthPlane, ViewConfig, build_planes, sample_rays
from .scene import DsmSurface, SharpnessParam, SpecularityMap, implicit_value


def laplace_cdf(d, beta):
    """Pseudo-density from signed distance: 0.5*exp(-d/b) for d >= 0, else 1 - 0.5*exp(d/b)."""
    d = np.asarray(d, dtype=np.float64)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    neg = np.minimum(d, 0.0)
    pos = np.maximum(d, 0.0)
    upper = 0.5 * np.exp(-pos / beta)
    lower = 1.0 - 0.5 * np.exp(neg / beta)
    return np.where(d >= 0.0, upper, lower)


def pseudo_density(surface: DsmSurface, beta, points):
    """Evaluate the pseudo-density at world points (..., 3)."""
    if isinstance(beta, SharpnessParam):
        beta = beta.beta
    return laplace_cdf(implicit_value(surface, points), beta)


def ray_transmittance(sigmas, range_step):
    """Opacities and transmittances for pseudo-densities along the last axis.

    alpha_i = 1 - exp(-sigma_i * step); T_i = prod_{k<i} (1 - alpha_k),
    so T_0 = 1. Returns (alpha, trans) with the input shape.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if range_step <= 0.0:
        raise ValueError("range_step must be positive")
    alpha = -np.expm1(-sigmas * range_step)
    surv = 1.0 - alpha
    trans = np.ones_like(alpha)
    if sigmas.shape[-1] > 1:
        trans[..., 1:] = np.cumprod(surv[..., :-1], axis=-1)
    return alpha, trans


def reflectance(view_dir, normals, theta=1.0):
    """Clamped cosine-power scattering: max(0, -<v, n>)**theta."""
    v = np.asarray(view_dir, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    base = np.maximum(0.0, -np.sum(v * n, axis=-1))
    th = np.asarray(theta, dtype=np.float64)
    out = np.where(base > 0.0, base, 1.0) ** th
    return np.where(base > 0.0, out, 0.0)


@dataclass
class SarImage:
    """A stack of range profiles, one row per azimuth plane."""

    amplitudes: np.ndarray
    view: ViewConfig | None = None
    noisy: bool = False

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.float64)
        if self.amplitudes.ndim != 2:
            raise ShapeMismatch("amplitudes must be 2-d (planes, range bins)")
        if self.view is not None:
            want = (self.view.n_planes, self.view.n_range_bins)
            if self.amplitudes.shape != want:
                raise ShapeMismatch(
                    f"amplitudes shape {self.amplitudes.shape} != view {want}"
                )
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")
        if np.any(self.amplitudes < 0.0):
            raise ValueError("amplitudes must be non-negative")


# theta handling inside a tape:
#   "none"  - Lambertian render, theta identically 1
#   "fixed" - theta grid supplied as plain values, not a trained parameter
#   "map"   - SpecularityMap; theta_sens holds d(theta)/d(raw) for the chain
@dataclass
class RenderTape:
    """Everything the reverse pass needs, recorded per (ray, bin) sample."""

    plane_index: int
    origins: np.ndarray  # (R, 3) jittered ray origins
    v: np.ndarray  # (3,) range direction
    d0: float
    range_step: float
    beta: float
    grid_shape: tuple
    theta_mode: str
    theta_sens: np.ndarray | None
    sigma: np.ndarray
    alpha: np.ndarray
    trans: np.ndarray
    refl: np.ndarray
    fval: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    thetas: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    profile: np.ndarray = field(repr=False, default=None)

    @property
    def n_rays(self):
        return self.sigma.shape[0]

    @property
    def n_range_bins(self):
        return self.sigma.shape[1]


def _theta_arrays(specularity, grid_shape):
    """Resolve the specularity argument to (mode, values, sens)."""
    if specularity is None:
        return "none", np.zeros((2, 2)), None
    if isinstance(specularity, SpecularityMap):
        values = specularity.theta
        if values.shape != grid_shape:
            raise ShapeMismatch(
                f"specularity grid {values.shape} != height grid {grid_shape}"
            )
        return "map", values, specularity.dtheta_draw
    values = np.ascontiguousarray(specularity, dtype=np.float64)
    if values.shape != grid_shape:
        raise ShapeMismatch(
            f"specularity grid {values.shape} != height grid {grid_shape}"
        )
    if np.any(values < 1.0):
        raise ValueError("specularity exponents must be >= 1")
    return "fixed", values, None


def _resolve_beta(beta):
    if isinstance(beta, SharpnessParam):
        return beta.beta
    beta = float(beta)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return beta


# scratch buffers for tape-reusing renders, keyed by (n_rays, n_bins);
# single-threaded by design (all kernels are serial for reproducibility)
_POOL = {}


def _tape_buffers(shape, reuse):
    if reuse:
        bufs = _POOL.get(shape)
        if bufs is None:
            bufs = (
                [np.empty(shape) for _ in range(12)],
                np.empty(shape, dtype=np.int32),
                np.empty(shape, dtype=np.int32),
                np.empty(shape[1]),
            )
            _POOL[shape] = bufs
        return bufs
    return (
        [np.empty(shape) for _ in range(12)],
        np.empty(shape, dtype=np.int32),
        np.empty(shape, dtype=np.int32),
        np.empty(shape[1]),
    )


def render_rays(surface, specularity, beta, origins, v, d0, range_step, n_bins,
                plane_index=0, reuse_buffers=False):
    """Core render: march rays from explicit origins and record the tape.

    Re-invoking this with a tape's stored origins and parameters reproduces
    the tape bit-for-bit, which is what makes replay and resume exact.

    With reuse_buffers=True the tape points into shared scratch storage and
    is only valid until the next reusing render; the training loop uses
    this to avoid reallocating ~7 MB per plane.
    """
    beta = _resolve_beta(beta)
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    if origins.ndim != 2 or origins.shape[1] != 3:
        raise ShapeMismatch("origins must be (n_rays, 3)")
    v = np.asarray(v, dtype=np.float64)
    n_rays = origins.shape[0]
    shape = (n_rays, n_bins)
    mode, theta_values, theta_sens = _theta_arrays(specularity, surface.heights.shape)

    f64, ix, iy, profile = _tape_buffers(shape, reuse_buffers)
    sigma, alpha, trans, refl, fval, hx, hy, thetas, fx, fy, ax, ay = f64

    _kernels.forward_plane(
        surface.heights,
        theta_values,
        mode != "none",
        beta,
        origins[:, 0].copy(),
        origins[:, 1].copy(),
        origins[:, 2].copy(),
        float(v[0]),
        float(v[1]),
        float(v[2]),
        float(d0),
        float(range_step),
        sigma,
        alpha,
        trans,
        refl,
        fval,
        hx,
        hy,
        thetas,
        fx,
        fy,
        ax,
        ay,
        ix,
        iy,
        profile,
    )

    tape = RenderTape(
        plane_index=plane_index,
        origins=origins,
        v=v.copy(),
        d0=float(d0),
        range_step=float(range_step),
        beta=beta,
        grid_shape=surface.heights.shape,
        theta_mode=mode,
        theta_sens=theta_sens,
        sigma=sigma,
        alpha=alpha,
        trans=trans,
        refl=refl,
        fval=fval,
        hx=hx,
        hy=hy,
        thetas=thetas,
        fx=fx,
        fy=fy,
        ax=ax,
        ay=ay,
        ix=ix,
        iy=iy,
        profile=profile,
    )
    return profile, tape


def render_plane(surface, specularity, beta, plane: AzimuthPlane, view: ViewConfig,
                 jitter=False, rng=None, reuse_buffers=False):
    """Render one azimuth plane; returns (profile, tape).

    With jitter=True an rng must be supplied; ray origins then get a
    Gaussian across-track offset of half the inter-ray spacing.
    """
    if jitter and rng is None:
        raise ValueError("jitter=True requires an rng")
    origins = sample_rays(plane, view, rng if jitter else None)
    return render_rays(
        surface,
        specularity,
        beta,
        origins,
        plane.v,
        view.range_origin,
        view.range_step,
        view.n_range_bins,
        plane_index=plane.plane_index,
        reuse_buffers=reuse_buffers,
    )


def render_image(surface, specularity, beta, view: ViewConfig, jitter=False, seed=0):
    """Render the full stack of azimuth planes for a view.

    Jitter randomness is derived per plane from (seed, plane_index), so any
    plane renders identically whether alone or inside the stack.
    """
    planes = build_planes(view)
    amps = np.empty((view.n_planes, view.n_range_bins))
    for plane in planes:
        rng = None
        if jitter:
            rng = np.random.default_rng(
                np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, plane.plane_index])
            )
        profile, _ = render_plane(surface, specularity, beta, plane, view,
                                  jitter=jitter, rng=rng)
        amps[plane.plane_index] = profile
    return SarImage(amplitudes=amps, view=view)
