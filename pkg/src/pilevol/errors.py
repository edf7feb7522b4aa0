"""Exception types shared across the package."""


class PilevolError(Exception):
    """Base class for all pilevol errors."""


class InvalidParameter(PilevolError, ValueError):
    """A numeric or enum parameter is outside its valid range."""


class EmptyCloud(PilevolError, ValueError):
    """An operation that requires points received an empty cloud."""


class DegenerateCloud(PilevolError, ValueError):
    """The cloud geometry does not support the requested fit (too few
    points, collinear, coplanar, or no consensus reached)."""


class DegenerateInput(PilevolError, ValueError):
    """2D geometry input is degenerate (fewer than 3 points or collinear)."""


class DegenerateHeights(PilevolError, ValueError):
    """All z values are identical; a height histogram cannot be built."""


class EmptyBand(PilevolError, ValueError):
    """The ground search band contains no histogram bins."""


class LabelMismatch(PilevolError, ValueError):
    """Cluster labels do not match the cloud they are applied to."""


class NotUnitVector(PilevolError, ValueError):
    """A direction argument is not normalized."""


class MalformedHeader(PilevolError, ValueError):
    """A PLY header does not follow the supported subset of PLY 1.0."""


class UnsupportedProperty(PilevolError, ValueError):
    """A PLY vertex property has a type this reader cannot skip over."""


class NonFiniteCoordinate(PilevolError, ValueError):
    """A parsed coordinate is NaN or infinite."""

    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"non-finite coordinate at point row {row}")


class ConfigError(PilevolError, ValueError):
    """A pipeline configuration file or value is invalid."""
