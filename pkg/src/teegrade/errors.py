"""Exception types shared across the package."""


class TeegradeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TeegradeError, ValueError):
    """A tensor dimension does not match what an operation requires.

    Carries the offending dimension by name so callers can report it
    without parsing the message.
    """

    def __init__(self, dimension, expected, actual, context=""):
        self.dimension = dimension
        self.expected = expected
        self.actual = actual
        where = f" in {context}" if context else ""
        super().__init__(
            f"shape mismatch{where}: {dimension} expected {expected}, got {actual}"
        )


class BuildError(TeegradeError, ValueError):
    """A model specification cannot be realised (e.g. spatial collapse)."""


class ConfigError(TeegradeError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DataError(TeegradeError, ValueError):
    """A dataset, manifest, or label container is unusable."""


class TrainingDiverged(TeegradeError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, loss, batch_index=None, epoch=None):
        self.loss = loss
        self.batch_index = batch_index
        self.epoch = epoch
        at = []
        if epoch is not None:
            at.append(f"epoch {epoch}")
        if batch_index is not None:
            at.append(f"batch {batch_index}")
        where = " at " + ", ".join(at) if at else ""
        super().__init__(f"non-finite loss {loss!r}{where}")
