"""Exception hierarchy for the anonymization library.

Every error raised on purpose derives from WsiAnonError so callers can
catch one base class. The CLI maps subclasses onto exit codes.
"""


class WsiAnonError(Exception):
    """Base class for all errors raised by this package."""


class IoFailure(WsiAnonError):
    """An underlying read, write, or filesystem operation failed."""


class OutOfBounds(WsiAnonError):
    """A read or write was requested outside the bounds of the store."""


class UnsupportedFormat(WsiAnonError):
    """The input is not a file format this library can handle."""


class CorruptStructure(WsiAnonError):
    """The file matches a known format but its structure is invalid."""


class CorruptContainer(CorruptStructure):
    """A multi-file slide set is internally inconsistent."""


class TagAbsent(WsiAnonError):
    """A required tag or attribute is missing from the structure."""


class LabelNotSeparable(WsiAnonError):
    """The requested operation needs a label/macro split this format lacks."""


class ReplacementConstraintViolation(WsiAnonError):
    """No same-length replacement satisfies the attribute's declared type."""


class SessionFinalized(WsiAnonError):
    """Data was fed to a streaming session after finalize()."""


class PlanConflict(WsiAnonError):
    """Two patches in one plan overlap; the plan is unusable."""
