"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid run or grid configuration (bad ordering, ranges, unknown keys)."""


class ShapeMismatchError(ValueError):
    """Array shapes or grids of two operands do not match."""


class DealiasingError(ValueError):
    """Angular resolution too small for the requested operation."""


class DomainError(ValueError):
    """Evaluation requested outside the exterior flow domain."""


class SnapshotFormatError(IOError):
    """Snapshot file is truncated, has a bad magic/version, or mismatches the run."""


class CflViolationError(RuntimeError):
    """Advective CFL number exceeded the configured abort threshold."""
