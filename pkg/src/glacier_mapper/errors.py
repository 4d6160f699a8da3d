"""Exception hierarchy; the CLI maps these onto exit codes."""


class GlacierMapperError(Exception):
    """Base class for all package errors."""


class ConfigError(GlacierMapperError):
    """Invalid or incomplete configuration (CLI exit code 2)."""


class DataError(GlacierMapperError):
    """Unusable input data (CLI exit code 3)."""


class ParseError(DataError):
    """Malformed file contents."""


class StructureError(DataError):
    """Dimension or alignment mismatch between rasters."""


class InconsistencyError(GlacierMapperError):
    """An internal invariant was violated, e.g. a cycle in a flow field."""


class EmptyEvaluationError(DataError):
    """Nothing left to count after bounding and exclusion."""
