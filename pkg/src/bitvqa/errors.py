"""Exception and warning types shared across the package."""


class BitvqaError(Exception):
    """Base class for all package-specific errors."""


class ExtractionError(BitvqaError):
    """Problem while turning a bytestream into frame records."""


class MalformedStreamError(ExtractionError):
    """Input bytes violate Annex-B / syntax expectations."""


class UnsupportedFeatureError(ExtractionError):
    """Syntactically valid stream uses a feature outside this parser's scope
    (e.g. separate colour planes, FMO, data partitioning)."""


class FeatureError(BitvqaError, ValueError):
    """Invalid or inconsistent feature data."""


class PredictionDomainError(BitvqaError, ValueError):
    """Model inputs or coefficients put a formula outside its domain
    (log of a non-positive value, zero denominator, ...)."""


class FittingError(BitvqaError, ValueError):
    """Invalid fitting request (empty dataset, arity mismatch, ...)."""


class UndefinedMetricError(BitvqaError, ValueError):
    """Metric is mathematically undefined for the given vectors
    (e.g. Pearson correlation with zero variance)."""


class SchemaError(BitvqaError, ValueError):
    """A CSV/JSON document violates its declared schema.

    Carries the offending row/column when known so CLI errors can point at
    the exact cell.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class ImputedFeatureWarning(UserWarning):
    """A model consumed a feature that was defaulted, not measured."""
