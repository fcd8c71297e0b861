"""Exception types shared across the toolkit."""


class TagwiseError(Exception):
    """Base class for all toolkit errors."""


class FormatError(TagwiseError):
    """A file or serialized document does not match its declared format."""


class LabelError(TagwiseError):
    """A behaviour label is unknown or inconsistent with the declared set."""


class ShapeError(TagwiseError):
    """An array argument has the wrong shape or length."""


class DataError(TagwiseError):
    """Input data is structurally valid but unusable (empty, degenerate)."""


class ConfigError(TagwiseError):
    """A configuration value violates its documented constraints."""


class ProtocolError(TagwiseError):
    """A synthesis protocol violates its documented constraints."""
