"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: config errors exit 2, data errors 3,
model errors 4.
"""

from __future__ import annotations


class PlasmaSeedError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PlasmaSeedError):
    """Bad flags, config file, or request parameters."""


class DataError(PlasmaSeedError):
    """Base class for dataset loading and validation problems."""


class SchemaError(DataError):
    """Column set does not match the documented schema."""


class ParseError(DataError):
    """A cell could not be parsed; carries row and column context."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DataValidationError(DataError):
    """A value violates a dataset invariant (range, label set, consistency)."""


class DomainError(DataValidationError):
    """An argument lies outside the documented domain of an operation."""


class UnimputableColumnError(DataError):
    """A column has no observed value anywhere, so no mean exists."""


class DegenerateTargetError(DataError):
    """Target has zero variance, e.g. R^2 is undefined."""


class ModelError(PlasmaSeedError):
    """Model fitting or prediction failed."""


class NotFittedError(ModelError):
    """An unfitted pipeline or model was asked to transform/predict."""


class TrackingError(PlasmaSeedError):
    """Run store problems."""


class ImmutableRunError(TrackingError):
    """Attempt to modify a finished run."""


class FilterSyntaxError(TrackingError):
    """Malformed run-query filter expression."""
