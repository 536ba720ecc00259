"""Exception hierarchy shared by every module."""


class SafeError(Exception):
    """Base class for all library errors."""


class ConfigError(SafeError, ValueError):
    pass


class DataError(SafeError):
    pass


class DimensionMismatch(SafeError, ValueError):
    pass


class ZeroVector(SafeError, ArithmeticError):
    """Raised when a cosine-type quantity is requested for a zero-norm vector."""


class SequenceTooShort(SafeError, ValueError):
    pass


class EmptyMap(SafeError, ValueError):
    pass


class MalformedEmbeddingFile(DataError):
    pass


class MalformedRecord(DataError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(DataError):
    pass


class MissingTimestamp(DataError):
    pass


class TooFewExamples(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class CorruptModelFile(DataError):
    pass


class VocabularyMismatch(DataError):
    pass


class LengthMismatch(SafeError, ValueError):
    pass


class EmptyInput(SafeError, ValueError):
    pass
