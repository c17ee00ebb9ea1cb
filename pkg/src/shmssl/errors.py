"""Exception hierarchy shared across the package."""


class ShmsslError(Exception):
    """Base class for all package errors."""


class DimensionError(ShmsslError):
    """Tensor or parameter shapes do not line up."""


class NumericError(ShmsslError):
    """Non-finite values or ill-defined numeric operations (e.g. zero-norm vectors)."""


class UsageError(ShmsslError):
    """API used out of order (e.g. backward without a cached forward)."""


class ConfigError(ShmsslError):
    """Invalid configuration value or combination."""


class InputError(ShmsslError):
    """Invalid data passed to an operation (out-of-range labels, bad rows)."""


class MissingDataError(ShmsslError):
    """A segment is empty or otherwise unusable."""


class GenerationError(ShmsslError):
    """A synthetic segment failed its own pattern contract."""


class FormatError(ShmsslError):
    """A serialized file is corrupt or has the wrong version.

    `offset` points at the first byte that failed to parse, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingDivergedError(ShmsslError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


class PipelineError(ShmsslError):
    """A stage of an experiment failed; carries enough context to resume."""

    def __init__(self, stage: str, method: str, seed: int, cause: BaseException):
        super().__init__(f"stage={stage} method={method} seed={seed}: {cause}")
        self.stage = stage
        self.method = method
        self.seed = seed
        self.cause = cause
