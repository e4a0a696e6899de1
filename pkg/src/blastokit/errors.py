"""Exception hierarchy shared by all blastokit modules."""


class BlastokitError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(BlastokitError):
    """Tensor or image dimensions violate an operation's contract."""


class ConfigError(BlastokitError):
    """Invalid configuration value (bad key, range, or combination)."""


class DataError(BlastokitError):
    """Dataset-level problem: missing class, empty split, bad manifest."""


class ImageFormatError(BlastokitError):
    """File exists but is not a decodable PNG/JPEG image."""


class TrainingError(BlastokitError):
    """Numeric failure during training (non-finite loss or gradient)."""


class UntrainedModelError(BlastokitError):
    """Inference requested before any training step populated statistics."""


class CheckpointError(BlastokitError):
    """Base class for checkpoint file problems."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint ends before all declared payloads were read."""
