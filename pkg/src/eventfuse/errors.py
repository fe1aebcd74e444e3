"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """A caller broke a documented precondition (bad shape, bad range...)."""


class FormatError(ValueError):
    """A file did not match its declared binary or text format."""


class ParseError(FormatError):
    """A text record could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(ValueError):
    """Input data is well-formed but inconsistent (missing ids, empty sets)."""


class BoundsError(DataError):
    """An event or index lies outside the declared sensor/array bounds."""
