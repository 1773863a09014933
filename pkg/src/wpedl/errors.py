"""Exception hierarchy shared across the toolkit.

Three roots map onto the CLI exit codes: ConfigError (2) for anything wrong
with configuration or declared inputs, DataError (3) for bad or missing data
encountered while running, NumericError (4) for non-finite numerics.
"""


class WpedlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(WpedlError):
    """Invalid configuration, manifest, or declared parameter."""


class DataError(WpedlError):
    """Bad or missing data encountered at runtime."""


class NumericError(WpedlError):
    """Non-finite value produced where finite numerics are required."""


class ManifestError(ConfigError):
    """Malformed or inconsistent recording manifest."""


class MissingFileError(DataError):
    """A referenced file does not exist."""


class TooShortError(DataError):
    """Recording or segment shorter than one analysis window."""


class NonFiniteSampleError(NumericError):
    """Sensor data contains NaN or infinite samples."""


class NyquistViolationError(ConfigError):
    """A configured component frequency is not below half the sample rate."""


class EmptyInputError(DataError):
    """An operation received an empty input where samples are required."""


class RowSumViolationError(DataError):
    """A probability row does not sum to one within tolerance."""


class LabelMismatchError(DataError):
    """Label set of an input does not match the expected classes."""


class UnknownSampleError(DataError):
    """A sample id was requested that the backend has no prediction for."""


class DuplicateSampleError(DataError):
    """The same sample id appears more than once in a probability file."""


class CheckpointError(DataError):
    """Unreadable or inconsistent model checkpoint."""


class BadMagicError(CheckpointError):
    """Checkpoint file does not start with the expected magic bytes."""


class VersionMismatchError(CheckpointError):
    """Checkpoint was written by an unsupported format version."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint file ends before all declared payload was read."""


class StageError(WpedlError):
    """A pipeline stage failed; wraps the causing error with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
