"""Exception types shared by all modules.

Each carries the CLI exit status it maps to, so the driver can translate
failures without a lookup table.
"""


class SymminError(Exception):
    exit_code = 1


class InvalidParameter(SymminError, ValueError):
    exit_code = 2


class FieldParseError(InvalidParameter):
    """Malformed GridFunction text file; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantDomainViolation(SymminError):
    """Domain is not mapped into itself by the group.

    ``witness`` is the (x, y) coordinate of the worst offending node and
    ``element`` the index of the group element that moves it out.
    """

    exit_code = 3

    def __init__(self, message, witness=None, element=None):
        super().__init__(message)
        self.witness = witness
        self.element = element


class NotInvariantError(SymminError):
    exit_code = 3


class DivergenceError(SymminError):
    exit_code = 4


class FieldIOError(SymminError):
    exit_code = 5
