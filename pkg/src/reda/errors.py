"""Exception hierarchy shared across the toolkit."""


class RedaError(Exception):
    """Base class for all domain errors raised by this package."""


class MidiParseError(RedaError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class QuantizeError(RedaError):
    """Raised when a score cannot be mapped onto the 16-sub-beat bar grid."""


class StructuralError(RedaError):
    """A token stream violates sortedness or bar-coverage rules."""

    def __init__(self, message, index=None):
        if index is not None:
            message = f"{message} (token index {index})"
        super().__init__(message)
        self.index = index
