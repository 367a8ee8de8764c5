"""Exception types shared across the package."""


class MetasenseError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(MetasenseError, ValueError):
    """Raised when a configuration document is malformed or violates a constraint.

    Validation collects every violation before raising, so ``str(exc)``
    lists all offending fields, not just the first one found.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GeometryError(MetasenseError, ValueError):
    """Raised when a scene layout is impossible or numerically unsafe."""


class DegenerateChannelError(MetasenseError, ValueError):
    """Raised when combining weights are requested for an all-zero channel."""


class CheckpointError(MetasenseError, ValueError):
    """Raised when a checkpoint document cannot be parsed."""


class IncompatibleCheckpointError(CheckpointError):
    """Raised when a checkpoint's architecture digest does not match its layers."""


class SearchSpaceError(MetasenseError, ValueError):
    """Raised when exhaustive enumeration is requested for an intractably large space."""
