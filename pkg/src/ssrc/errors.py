"""Exception hierarchy.

Errors are grouped by how the command line reports them: validation problems
with the inputs, numerical failures of the identification pipeline, and
capacity limits.
"""


class SSRCError(Exception):
    """Base class for all package errors."""


class ValidationError(SSRCError, ValueError):
    """Input data or configuration violates a documented invariant."""


class DimensionError(ValidationError):
    """Array shapes are inconsistent."""


class ParseError(ValidationError):
    """A file could not be parsed; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ValidationError):
    """A serialized document does not follow the expected schema."""


class InsufficientDataError(ValidationError):
    """Too few transitions to identify a model."""


class UnknownRegimeError(ValidationError, KeyError):
    """A regime label has no associated model."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericalError(SSRCError):
    """The numerical pipeline cannot produce a result."""


class RankZeroError(NumericalError):
    """Every singular value of the system matrix is below the threshold."""


class EmptyDictionaryError(NumericalError):
    """The relational graph admits no coupling entries."""


class StructureError(NumericalError):
    """A coupling column has no admissible support, so it cannot be stochastic."""


class CapacityError(NumericalError):
    """Requested dimensions exceed the supported size."""
