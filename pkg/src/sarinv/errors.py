"""Exception types shared across the package."""


class SarinvError(Exception):
    """Base class for all package errors."""


class InvalidGeometry(SarinvError):
    """Acquisition geometry is inconsistent or cannot cover the scene."""


class ShapeMismatch(SarinvError):
    """Two rasters or profiles that must share a shape do not."""


class TapeMismatch(SarinvError):
    """A backward pass received data that does not match its tape."""


class UnsupportedLooks(SarinvError):
    """Speckle model only supports single-look noise."""


class NonFiniteLoss(SarinvError):
    """Training produced a NaN/Inf loss or gradient."""


class UnknownScene(SarinvError):
    """Requested procedural scene name does not exist."""


class RasterIOError(SarinvError):
    """Base class for raster file format errors."""


class BadMagic(RasterIOError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(RasterIOError):
    """File ends before the declared payload is complete."""


class NonFiniteValue(RasterIOError):
    """Raster payload contains NaN or Inf."""


class ConfigError(SarinvError):
    """Base class for config file errors."""


class MissingKey(ConfigError):
    """A required config key is absent."""


class DuplicateKey(ConfigError):
    """A config key appears more than once."""


class UnknownKey(ConfigError):
    """A config key is not part of the schema."""
