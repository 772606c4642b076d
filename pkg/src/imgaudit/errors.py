"""Exception hierarchy shared across the toolkit.

Exit-code classes used by the CLI:
  1 usage, 2 I/O (plain OSError), 3 data, 4 numeric.
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3


class UsageError(AuditError):
    """Bad command-line invocation."""

    exit_code = 1


class DataError(AuditError):
    """Malformed, inconsistent or empty input data."""

    exit_code = 3


class FormatError(DataError):
    """Unsupported or corrupt file format."""


class ParseError(DataError):
    """Manifest / CSV parse failure; message carries the line number."""


class DimensionError(DataError):
    """Shape or size mismatch between operands."""


class EmptyDatasetError(DataError):
    """An operation received an empty image/sample collection."""


class IncompatibleFingerprintsError(DataError):
    """Fingerprints with differing lengths or settings were combined."""


class NumericError(AuditError):
    """Numerically degenerate situation (division by zero, single-class metric...)."""

    exit_code = 4


class NormalizationError(NumericError):
    """Profile normalization requested but the DC bin is zero."""


class DegenerateMetricError(NumericError):
    """Metric undefined for the given labels (e.g. single-class ROC-AUC)."""


class DegenerateGeometryError(NumericError):
    """Embedding input collapses to a single point."""
