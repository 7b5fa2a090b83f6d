"""Exception hierarchy shared by all ipcpred modules."""


class IpcPredError(Exception):
    """Base class for every error raised by this package."""


class StatsParseError(IpcPredError, ValueError):
    """A stats file could not be parsed.

    ``line`` is the 1-based line number for line-level errors and ``None``
    for file-level errors such as unbalanced section delimiters.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MappingError(IpcPredError, ValueError):
    pass


class ManifestError(IpcPredError, ValueError):
    pass


class TargetExtractionError(IpcPredError, ValueError):
    pass


class IngestError(IpcPredError, ValueError):
    pass


class DatasetError(IpcPredError, ValueError):
    pass


class CsvFormatError(DatasetError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SplitError(DatasetError):
    pass


class NormalizationError(DatasetError):
    pass


class ModelError(IpcPredError, ValueError):
    pass


class WidthMismatchError(ModelError):
    pass


class RegimeMismatchError(ModelError):
    pass


class WrongModelKindError(ModelError):
    pass


class ModelFormatError(ModelError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class NumericFailure(IpcPredError, ArithmeticError):
    """Training diverged or produced non-finite values."""


class ReportError(IpcPredError, ValueError):
    pass
