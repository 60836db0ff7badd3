"""Exception hierarchy.

``SpecError`` subclasses map to CLI exit code 2, ``DataError`` subclasses to 3.
"""


class IntervalLabError(Exception):
    pass


class SpecError(IntervalLabError):
    """Invalid configuration or experiment description."""


class ConfigError(SpecError):
    pass


class DataError(IntervalLabError):
    """Input data is malformed or unusable."""


class TraceFormatError(DataError):
    pass


class BadMagic(TraceFormatError):
    pass


class VersionMismatch(TraceFormatError):
    pass


class TruncatedRecord(TraceFormatError):
    def __init__(self, offset, message=None):
        self.offset = offset
        super().__init__(message or f"truncated record at byte offset {offset}")


class MetaMismatch(DataError):
    pass


class EmptyTrace(DataError):
    pass


class IntervalOutOfRange(DataError):
    pass


class AllZeroActivity(DataError):
    pass


class AlignmentError(DataError):
    pass


class DivisionByZeroFull(DataError):
    pass


class EmptyScenario(DataError):
    pass
