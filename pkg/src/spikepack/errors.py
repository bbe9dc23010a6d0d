"""Exception types shared across the package."""


class SpikePackError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SpikePackError, ValueError):
    """Array shapes or sizes do not agree with what an operation expects."""


class DomainError(SpikePackError, ValueError):
    """A value lies outside the domain an operation accepts."""


class ContainerError(SpikePackError):
    """A binary container or stream file is missing, truncated or corrupt."""


class TrainingDivergedError(SpikePackError, FloatingPointError):
    """The training loss became non-finite."""
