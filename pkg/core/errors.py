"""
Exception hierarchy for the structure-loss toolkit.

Every error derives from SesimError and, where one fits, from the matching
builtin so that callers may catch either.
"""


class SesimError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(SesimError, ValueError):
    """Operand, weight or gradient shapes disagree."""


class GeometryError(SesimError, ValueError):
    """Sampling geometry is invalid for the feature map it is applied to."""


class ConfigError(SesimError, ValueError):
    """A configuration value is out of range or a key is unknown."""


class UnknownTapError(SesimError, KeyError):
    """A tap name is not exposed by the architecture or feature stack."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown tap"


class WeightFileMissingError(SesimError, FileNotFoundError):
    """The weight manifest or its binary payload does not exist."""


class WeightLengthError(SesimError):
    """The binary payload length disagrees with the manifest."""


class WeightShapeError(SesimError):
    """A stored tensor shape disagrees with the architecture."""


class ImageFormatError(SesimError, ValueError):
    """The image file is not an 8-bit RGB PNG."""


class ImageIOError(SesimError, OSError):
    """Reading or writing an image failed."""
