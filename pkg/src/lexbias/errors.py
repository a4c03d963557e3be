"""Exception types shared across the package.

CLI exit codes: ConfigError -> 2, DataError/LexiconParseError -> 3,
TrainingDivergenceError -> 4.
"""


class LexbiasError(Exception):
    """Base class for all package errors."""


class DimensionError(LexbiasError, ValueError):
    """Operand shapes do not conform; message names the offending axis."""


class GradientError(LexbiasError, ValueError):
    """Backward pass called on an unsuitable tensor (e.g. non-scalar loss)."""


class OracleError(LexbiasError, RuntimeError):
    """The finite-difference oracle detected a non-deterministic function."""


class EmptyCatalogError(LexbiasError, ValueError):
    """Attention was asked to attend over zero keys."""


class ConfigError(LexbiasError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(LexbiasError, ValueError):
    """Malformed or missing data (corpus records, catalogs, spans)."""


class LexiconParseError(DataError):
    """Lexicon file could not be parsed; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TrainingDivergenceError(LexbiasError, RuntimeError):
    """Training loss became non-finite; the last good state is attached."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class FrozenCoreViolation(LexbiasError, RuntimeError):
    """A parameter that must stay frozen changed during adapter training."""


class CheckpointError(LexbiasError, ValueError):
    """Checkpoint container is malformed or incompatible (vocab hash)."""
