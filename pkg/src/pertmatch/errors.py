"""Exception hierarchy. CLI exit codes are attached to the classes."""


class PertMatchError(Exception):
    exit_code = 1


class ArgumentError(PertMatchError, ValueError):
    exit_code = 2


class DomainError(ArgumentError):
    """Argument outside the mathematical domain of an operation."""


class FormatError(ArgumentError):
    """Malformed or unsupported file content."""


class DegenerateError(ArgumentError):
    pass


class ModeError(PertMatchError):
    """Instance mode incompatible with the requested algorithm."""

    exit_code = 3


class CapacityError(PertMatchError):
    """Instance too large for an exact oracle."""

    exit_code = 2


class InconclusiveError(PertMatchError):
    exit_code = 4
