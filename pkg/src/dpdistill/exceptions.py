"""Package exception types."""


class ConfigError(ValueError):
    """Experiment config file failed schema validation."""


class IdxFormatError(ValueError):
    """File is not a valid IDX image/label file."""


class CheckpointError(ValueError):
    """Checkpoint bytes are malformed or of an unsupported version."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; the model was restored to its last good state."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
