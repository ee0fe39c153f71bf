"""Exception hierarchy shared by all shadowbench modules."""


class ShadowBenchError(Exception):
    """Base class for every error raised by shadowbench."""


class DimensionMismatchError(ShadowBenchError, ValueError):
    """Two objects that must live in the same Hilbert space do not."""


class InvariantViolation(ShadowBenchError, ValueError):
    """A value breaks a documented invariant (unit norm, Hermiticity, trace)."""


class DiagnosticCapExceeded(ShadowBenchError, ValueError):
    """A dense matrix was requested above the configured dimension cap.

    Dense forms exist only for diagnostics; use the matrix-free routines
    for larger dimensions.
    """


class DatasetFormatError(ShadowBenchError, ValueError):
    """A dataset file is malformed or internally inconsistent."""


class ConfigError(ShadowBenchError, ValueError):
    """An experiment plan or chain configuration is inconsistent."""
