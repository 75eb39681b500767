class DomainError(ValueError):
    """An input violates a documented domain invariant (bad coordinate,
    out-of-window time, malformed dataset row, ...)."""


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or parameter tensor turns non-finite during
    training; the message names the first offending tensor."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed, truncated, or inconsistent with the
    model it is being loaded into."""
