"""Exception types shared across the simulator."""


class SbfcError(Exception):
    """Base class for all library errors."""


class ParseError(SbfcError):
    """Scenario file could not be parsed; message carries file/key context."""


class ValidationError(SbfcError):
    """A scenario value violates a documented invariant."""


class DimensionMismatch(SbfcError):
    """Vector arguments disagree on joint count."""


class SingularInertia(SbfcError):
    """Inertia matrix solve hit a pivot below threshold (invalid parameters)."""


class NumericalDivergence(SbfcError):
    """A simulated state magnitude exceeded the divergence guard (1e6)."""


class ScheduleConflict(SbfcError):
    """Two fault events on the same joint share an onset time."""


class EmptyWindow(SbfcError):
    """Cost evaluation was asked for a window with fewer than 2 samples."""
