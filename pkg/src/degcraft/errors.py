"""Exception hierarchy.

Validation problems (bad parameters, malformed files, degenerate inputs) derive
from :class:`ValidationError`; anything touching the filesystem or a codec
derives from :class:`IOFailure`.  The CLI maps the two families onto exit
codes 1 and 2.
"""

from __future__ import annotations


class DegcraftError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DegcraftError, ValueError):
    pass


class ParameterError(ValidationError):
    pass


class DomainError(ValidationError):
    """A value falls outside the range covered by a bin grid."""

    def __init__(self, axis: str, value: float, lo: float, hi: float):
        self.axis = axis
        super().__init__(f"{axis}={value!r} outside [{lo}, {hi}]")


class SizingError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class DegenerateDistributionError(ValidationError):
    pass


class IOFailure(DegcraftError, OSError):
    pass


class DecodeError(IOFailure):
    pass


class CodecError(IOFailure):
    pass
