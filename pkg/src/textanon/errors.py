"""Exception types shared across the package."""


class TextAnonError(Exception):
    """Base class for all package errors."""


class CorpusFormatError(TextAnonError, ValueError):
    """Raised when a corpus file cannot be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(TextAnonError, ValueError):
    """A label does not fit the BIO scheme or is missing from a schema."""


class FeatureError(TextAnonError, ValueError):
    pass


class FingerprintMismatch(TextAnonError, ValueError):
    """Feature configuration differs from the one a model was trained with."""


class ModelFormatError(TextAnonError, ValueError):
    pass


class LexiconError(TextAnonError, ValueError):
    pass


class DivergenceError(TextAnonError, ArithmeticError):
    """Training produced a non-finite or exploding objective."""

    def __init__(self, epoch, objective):
        super().__init__(
            f"training diverged at epoch {epoch}: objective = {objective!r}"
        )
        self.epoch = epoch
        self.objective = objective
