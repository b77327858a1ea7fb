"""Hand-derived reverse pass over a render tape.

No autograd anywhere: the backward kernel replays the chain rule of the
forward render exactly, using only values stored on the tape. Gradients
flow to the height grid (through the sample heights and through the
bilinear slopes), to the specularity raw grid when a trainable map was
rendered, and to the raw (log-space) sharpness scalar.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import TapeMismatch
from .renderer import RenderTape

FD_PARAM_WARN = 10_000


@dataclass
class GradientSet:
    """Gradients in raw parameter space for one or more planes."""

    d_heights: np.ndarray
    d_theta_raw: np.ndarray
    d_beta_raw: float

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.d_heights))
            and np.all(np.isfinite(self.d_theta_raw))
            and np.isfinite(self.d_beta_raw)
        )

    def add_(self, other: "GradientSet"):
        """In-place accumulate; shapes must agree."""
        if other.d_heights.shape != self.d_heights.shape:
            raise TapeMismatch("gradient height grids differ in shape")
        self.d_heights += other.d_heights
        self.d_theta_raw += other.d_theta_raw
        self.d_beta_raw += other.d_beta_raw
        return self

    def scaled(self, factor):
        return GradientSet(
            d_heights=self.d_heights * factor,
            d_theta_raw=self.d_theta_raw * factor,
            d_beta_raw=self.d_beta_raw * factor,
        )

    @classmethod
    def zeros(cls, grid_shape):
        return cls(
            d_heights=np.zeros(grid_shape),
            d_theta_raw=np.zeros(grid_shape),
            d_beta_raw=0.0,
        )


def backward_plane(tape: RenderTape, d_profile) -> GradientSet:
    """Push upstream per-bin gradients back through one plane's tape."""
    d_profile = np.ascontiguousarray(d_profile, dtype=np.float64)
    if d_profile.shape != (tape.n_range_bins,):
        raise TapeMismatch(
            f"upstream gradient has shape {d_profile.shape}, "
            f"tape has {tape.n_range_bins} range bins"
        )

    d_heights = np.zeros(tape.grid_shape)
    d_theta_values = np.zeros(tape.grid_shape)
    use_theta = tape.theta_mode != "none"

    d_beta_raw = _kernels.backward_plane(
        d_profile,
        tape.beta,
        float(tape.v[0]),
        float(tape.v[1]),
        float(tape.v[2]),
        tape.range_step,
        use_theta,
        tape.sigma,
        tape.alpha,
        tape.trans,
        tape.refl,
        tape.fval,
        tape.hx,
        tape.hy,
        tape.thetas,
        tape.fx,
        tape.fy,
        tape.ax,
        tape.ay,
        tape.ix,
        tape.iy,
        d_heights,
        d_theta_values,
    )

    if tape.theta_mode == "map":
        d_theta_raw = d_theta_values * tape.theta_sens
    else:
        # fixed or absent theta grid: not a parameter, no raw gradient
        d_theta_raw = np.zeros(tape.grid_shape)
    return GradientSet(d_heights=d_heights, d_theta_raw=d_theta_raw,
                       d_beta_raw=float(d_beta_raw))


def finite_difference_oracle(loss_fn, heights, theta_raw, beta_raw, step=1e-4):
    """Central finite differences of loss_fn over every raw parameter.

    loss_fn(heights, theta_raw, beta_raw) -> float. Cost is two loss
    evaluations per parameter; a warning fires above 10k parameters.
    Intended for verification on small scenes only.
    """
    heights = np.asarray(heights, dtype=np.float64)
    theta_raw = np.asarray(theta_raw, dtype=np.float64)
    n_params = heights.size + theta_raw.size + 1
    if n_params > FD_PARAM_WARN:
        warnings.warn(
            f"finite differencing {n_params} parameters "
            f"({2 * n_params} renders); use a smaller scene",
            stacklevel=2,
        )

    d_heights = np.zeros_like(heights)
    it = np.nditer(heights, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        hp = heights.copy()
        hm = heights.copy()
        hp[idx] += step
        hm[idx] -= step
        d_heights[idx] = (
            loss_fn(hp, theta_raw, beta_raw) - loss_fn(hm, theta_raw, beta_raw)
        ) / (2.0 * step)
        it.iternext()

    d_theta_raw = np.zeros_like(theta_raw)
    it = np.nditer(theta_raw, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        tp = theta_raw.copy()
        tm = theta_raw.copy()
        tp[idx] += step
        tm[idx] -= step
        d_theta_raw[idx] = (
            loss_fn(heights, tp, beta_raw) - loss_fn(heights, tm, beta_raw)
        ) / (2.0 * step)
        it.iternext()

    d_beta_raw = (
        loss_fn(heights, theta_raw, beta_raw + step)
        - loss_fn(heights, theta_raw, beta_raw - step)
    ) / (2.0 * step)

    return GradientSet(d_heights=d_heights, d_theta_raw=d_theta_raw,
                       d_beta_raw=float(d_beta_raw))
