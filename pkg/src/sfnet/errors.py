"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor dimensions are incompatible with the requested operation."""


class ConfigError(ValueError):
    """A configuration value is out of its allowed range."""


class NumericError(ArithmeticError):
    """A non-finite value was produced or encountered."""


class UsageError(RuntimeError):
    """An API was called in an unsupported way (e.g. backward on a detached node)."""


class FormatError(ValueError):
    """A file did not match its expected on-disk format."""


class CheckpointError(ValueError):
    """A checkpoint file is corrupt, truncated, or incompatible."""
