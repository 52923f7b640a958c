"""Exception hierarchy shared across the package."""


class ConeRankError(Exception):
    """Base class for all conerank errors."""


class InvalidInputError(ConeRankError, ValueError):
    """Raised when data handed to an operation violates its preconditions."""


class InvalidModelError(ConeRankError, ValueError):
    """Raised when a basis or model file is structurally invalid."""


class InvalidConfigError(ConeRankError, ValueError):
    """Raised when training configuration is inconsistent."""


class LetorParseError(ConeRankError, ValueError):
    """Raised on malformed qid-format ranking data, with the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NumericalError(ConeRankError, RuntimeError):
    """Raised when a numerical routine fails to produce a usable result."""
