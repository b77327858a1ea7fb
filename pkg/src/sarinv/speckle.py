"""Multiplicative single-look speckle and its diagnostics.

Single-look intensity speckle is Gamma(1, 1), i.e. unit-mean exponential
noise applied multiplicatively per (plane, bin) cell. Draws are derived
functionally from (seed, stream, row) so any image row can be re-noised
in isolation and whole images replay bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedLooks
from .renderer import SarImage

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    looks: int = 1

    def __post_init__(self):
        if self.looks != 1:
            raise UnsupportedLooks(
                f"only single-look speckle is implemented, got looks={self.looks}"
            )


def _row_rng(seed, stream, row):
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & _SEED_MASK, int(stream), int(row)])
    )


def sample_speckle(shape, seed=0, stream=0):
    """Unit-mean exponential draws, one independent substream per row."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 1:
        shape = (1,) + shape
    out = np.empty(shape)
    for row in range(shape[0]):
        u = _row_rng(seed, stream, row).random(shape[1])
        # inverse CDF of Exponential(1); log1p keeps precision near u = 0
        out[row] = -np.log1p(-u)
    return out


def apply_speckle(image: SarImage, cfg: NoiseConfig, stream=0) -> SarImage:
    """Multiply a clean image by fresh speckle draws; marks the result noisy."""
    if image.noisy:
        raise ValueError("image is already speckled")
    noise = sample_speckle(image.amplitudes.shape, seed=cfg.seed, stream=stream)
    return SarImage(
        amplitudes=image.amplitudes * noise,
        view=image.view,
        noisy=True,
    )


def sample_statistics(samples):
    """Mean, variance and KS distance of samples against the Exponential(1) CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    cdf = 1.0 - np.exp(-x)
    steps = np.arange(n, dtype=np.float64)
    d_lo = np.max(cdf - steps / n)
    d_hi = np.max((steps + 1.0) / n - cdf)
    return {
        "mean": float(np.mean(x)),
        "variance": float(np.var(x)),
        "ks_distance": float(max(d_lo, d_hi)),
        "n": int(n),
    }


def speckle_statistics(image: SarImage, reference: SarImage):
    """Ratio statistics of a speckled image against its noiseless reference.

    Pixels with reference amplitude <= 1e-9 are excluded; the remaining
    ratios should follow Exponential(1) when the image was produced by
    apply_speckle on the reference.
    """
    a = image.amplitudes
    r = reference.amplitudes
    if a.shape != r.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {r.shape}")
    mask = r > 1e-9
    if not np.any(mask):
        raise ValueError("reference has no usable pixels")
    return sample_statistics(a[mask] / r[mask])


def ks_critical_1pct(n):
    """Asymptotic 1% Kolmogorov-Smirnov critical value for n samples."""
    return 1.6276 / math.sqrt(n)
