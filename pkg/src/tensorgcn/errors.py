"""Shared exception types."""


class InputError(ValueError):
    """Invalid input data or configuration; CLI maps this to a nonzero exit."""


class TrainingError(RuntimeError):
    """Training aborted (for example on a non-finite loss)."""
