"""Exception hierarchy shared by every module of the package."""


class PermfreeError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class ValidationError(PermfreeError, ValueError):
    """Malformed input: bad index, size mismatch, unparsable text."""

    exit_code = 2


class ParseError(ValidationError):
    """Syntax error in the monomial/word mini-language."""

    def __init__(self, message, text="", offset=0):
        self.text = text
        self.offset = offset
        super().__init__(f"{message} at byte {offset}: {text!r}")


class DomainError(PermfreeError, ValueError):
    """Operation undefined for this input (e.g. Kreweras of a crossing permutation)."""

    exit_code = 2


class UnsupportedError(PermfreeError, ValueError):
    """Monomial shape or family combination with no formula behind it."""

    exit_code = 2


class BudgetError(PermfreeError, RuntimeError):
    """Exhaustive enumeration would exceed its configured limit."""

    exit_code = 3
