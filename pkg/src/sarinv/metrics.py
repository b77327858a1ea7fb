"""Reconstruction quality metrics.

Altitude errors are reported in ground-pixel units: height differences are
in scene units (the DSM footprint spans 1.0 x 1.0), so dividing by the
cell size expresses them as multiples of one ground cell.
"""

import numpy as np

from .errors import ShapeMismatch
from .scene import DsmSurface


def _height_pair(recovered, truth):
    a = recovered.heights if isinstance(recovered, DsmSurface) else np.asarray(recovered, float)
    b = truth.heights if isinstance(truth, DsmSurface) else np.asarray(truth, float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"height grids differ: {a.shape} vs {b.shape}")
    cell = 1.0 / a.shape[1]
    return a, b, cell


def altitude_rmse(recovered, truth):
    """Root-mean-square height error in ground pixels."""
    a, b, cell = _height_pair(recovered, truth)
    return float(np.sqrt(np.mean((a - b) ** 2)) / cell)


def altitude_mae(recovered, truth):
    """Mean absolute height error in ground pixels."""
    a, b, cell = _height_pair(recovered, truth)
    return float(np.mean(np.abs(a - b)) / cell)


def altitude_median(recovered, truth):
    """Median absolute height error in ground pixels."""
    a, b, cell = _height_pair(recovered, truth)
    return float(np.median(np.abs(a - b)) / cell)


def image_mse(rendered, observed):
    """Mean squared amplitude error between two profile stacks."""
    a = np.asarray(getattr(rendered, "amplitudes", rendered), dtype=np.float64)
    b = np.asarray(getattr(observed, "amplitudes", observed), dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
