"""
Exception hierarchy. Domain code raises these; only the CLI turns them into exit codes.
"""


class CsaeError(Exception):
    """Base class for every error raised by the csae package."""


class TensorShapeError(CsaeError, ValueError):
    pass


class LabelRangeError(CsaeError, ValueError):
    pass


class EmptyDatasetError(CsaeError, ValueError):
    pass


class ConfigError(CsaeError, ValueError):
    pass


class DataRangeError(CsaeError, ValueError):
    pass


class LatentDimensionError(CsaeError, ValueError):
    pass


class NonFiniteError(CsaeError, ArithmeticError):
    pass


class NonFiniteGradientError(NonFiniteError):
    pass


class TrainingDivergedError(NonFiniteError):
    def __init__(self, epoch: int, batch: int, stage: str, detail: str):
        self.epoch = epoch
        self.batch = batch
        self.stage = stage
        super().__init__(f"Training diverged in the {stage} step at epoch {epoch}, batch {batch}: {detail}")


class FileFormatError(CsaeError):
    """A checkpoint or dataset file does not follow its documented layout."""


class BadMagicError(FileFormatError):
    pass


class VersionMismatchError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class CountMismatchError(FileFormatError):
    pass
