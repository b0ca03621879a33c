"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on an argument was violated."""


class ShapeMismatch(InvalidArgument):
    """Array dimensions disagree with the declared dims."""


class CapacityError(InvalidArgument):
    """More centers requested than distinct codes exist."""


class GenerationFailure(RuntimeError):
    """Center sampling exhausted its retry budget."""


class FormatError(RuntimeError):
    """A binary file is malformed (bad magic, truncation, bad version)."""


class CacheMismatch(RuntimeError):
    """A backward pass was given a cache from a different forward call."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


class InvalidState(RuntimeError):
    """An operation was called on an object in an unusable state."""
