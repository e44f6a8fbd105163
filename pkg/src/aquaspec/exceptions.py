"""Toolkit exception types.

Everything user-facing derives from ValueError so callers can catch broadly.
The CLI maps these (and plain ValueError) to exit code 2; genuine I/O failures
map to exit code 3.
"""


class AquaspecError(ValueError):
    """Base class for toolkit-specific errors."""


class FormatError(AquaspecError):
    """A file or header does not follow the documented structure."""


class ParseError(AquaspecError):
    """A cell or field could not be parsed as the expected type."""


class ShapeError(AquaspecError):
    """Array dimensions or wavelength grids do not line up."""


class LabelingError(AquaspecError):
    """An operation that needs labeled samples met an unlabeled one."""


class CompatibilityError(AquaspecError):
    """A serialized artifact uses an unsupported format version."""


class ConditioningError(AquaspecError):
    """A linear solve was too ill-conditioned to give a trustworthy result."""
