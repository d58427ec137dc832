"""Exception hierarchy shared by all modules."""


class RwlpError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RwlpError, ValueError):
    """An argument violates a documented precondition."""


class GenerationError(RwlpError):
    """Random code generation could not satisfy its constraints."""


class AlistParseError(RwlpError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TooLargeError(RwlpError):
    """An exhaustive computation would exceed its enumeration budget."""


class SolverError(RwlpError):
    """The LP engine failed (iteration cap, numerical trouble, bad status)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StructuralError(RwlpError, ValueError):
    """An object's shape does not match the code it is used with."""
