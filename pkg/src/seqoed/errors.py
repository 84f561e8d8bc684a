"""Exception hierarchy shared across the package."""


class SeqoedError(Exception):
    """Base class for all package errors."""


class DomainError(SeqoedError):
    """An input lies outside the mathematical domain of an operation."""


class ConvergenceError(SeqoedError):
    """An iterative solver failed to reach its stopping criterion."""


class EvaluationError(SeqoedError):
    """Model evaluation failed at a specific data point.

    Carries the index of the offending record so callers can report which
    experiment broke the computation.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (record index {index})")
        self.index = index


class SingularMatrixError(SeqoedError):
    """A matrix that must be invertible is (numerically) singular.

    ``null_basis`` holds an orthonormal basis of the numerical null space,
    i.e. the parameter directions the design carries no information about.
    """

    def __init__(self, message: str, null_basis=None):
        super().__init__(message)
        self.null_basis = null_basis


class EstimationError(SeqoedError):
    """No multistart run produced a usable least-squares estimate."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleDesignError(SeqoedError):
    """No subset of the design space admits an invertible information matrix."""


class ParseError(SeqoedError):
    """A persisted file does not conform to its schema.

    ``row`` and ``column`` locate the offending cell for tabular inputs
    (1-based row number counting the header as row 1).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column!r})" if column else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column


class SchemaVersionError(ParseError):
    """A persisted document carries an unsupported schema version."""
