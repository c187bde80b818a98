"""Exception hierarchy shared by every module."""


class InputError(ValueError):
    """A caller passed arguments that violate an operation's preconditions."""


class ValidationError(ValueError):
    """Data read from disk or assembled in memory breaks an invariant."""


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """Non-finite parameters or ratios."""


class TransportError(RuntimeError):
    """Base class for generation-endpoint failures."""

    kind = "transport"

    def __init__(self, message: str, problem_id: str | None = None):
        self.problem_id = problem_id
        super().__init__(message)


class ConnectionFailure(TransportError):
    kind = "connection"


class HTTPStatusError(TransportError):
    kind = "status"

    def __init__(self, message: str, status: int, problem_id: str | None = None):
        self.status = status
        super().__init__(message, problem_id)


class SchemaMismatch(TransportError):
    kind = "schema"
