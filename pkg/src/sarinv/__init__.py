"""Differentiable SAR range-image rendering and surface recovery."""

__version__ = "0.1.0"

from .errors import (
    BadMagic,
    ConfigError,
    DuplicateKey,
    InvalidGeometry,
    MissingKey,
    NonFiniteLoss,
    NonFiniteValue,
    RasterIOError,
    SarinvError,
    ShapeMismatch,
    TapeMismatch,
    TruncatedFile,
    UnknownKey,
    UnknownScene,
    UnsupportedLooks,
)
from .geometry import AzimuthPlane, ViewConfig, build_planes, march_points, sample_rays
from .gradients import GradientSet, backward_plane, finite_difference_oracle
from .renderer import (
    RenderTape,
    SarImage,
    laplace_cdf,
    pseudo_density,
    ray_transmittance,
    reflectance,
    render_image,
    render_plane,
    render_rays,
)
from .scene import (
    DsmSurface,
    SharpnessParam,
    SpecularityMap,
    height_at,
    implicit_value,
    normal_at,
)

__all__ = [
    "AzimuthPlane",
    "BadMagic",
    "ConfigError",
    "DsmSurface",
    "DuplicateKey",
    "GradientSet",
    "InvalidGeometry",
    "MissingKey",
    "NonFiniteLoss",
    "NonFiniteValue",
    "RasterIOError",
    "RenderTape",
    "SarImage",
    "SarinvError",
    "ShapeMismatch",
    "SharpnessParam",
    "SpecularityMap",
    "TapeMismatch",
    "TruncatedFile",
    "UnknownKey",
    "UnknownScene",
    "UnsupportedLooks",
    "ViewConfig",
    "backward_plane",
    "build_planes",
    "finite_difference_oracle",
    "height_at",
    "implicit_value",
    "laplace_cdf",
    "march_points",
    "normal_at",
    "pseudo_density",
    "ray_transmittance",
    "reflectance",
    "render_image",
    "render_plane",
    "render_rays",
    "sample_rays",
]
