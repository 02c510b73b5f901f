"""Shared exception types."""


class RingRngError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RingRngError):
    """A value or data structure violates a documented invariant."""


class FileFormatError(RingRngError):
    """A tag or bit file is malformed.

    ``offset`` is the byte offset (or character index for ASCII bit files)
    at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class InsufficientStatisticsError(RingRngError):
    """An estimator ratio has an empty denominator."""


class InsufficientEntropyError(RingRngError):
    """Measured min-entropy is too low to size an extractor."""


class SequenceTooShortError(RingRngError):
    """A statistical test needs more bits than the sequence provides."""
