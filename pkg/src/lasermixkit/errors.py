"""Exception types shared by all lasermixkit modules."""


class ValidationError(ValueError):
    """Raised when an input violates an operation's preconditions."""


class EmptyInputError(ValueError):
    """Raised when an operation is undefined on empty input (e.g. a masked
    mean with an all-zero mask); callers are expected to skip the term."""


class FormatError(ValueError):
    """Raised by file parsers on malformed payloads.

    `offset` is the byte offset at which the problem was detected and is
    always included in the message.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ConfigError(ValueError):
    """Raised when a training configuration is inconsistent, before any
    training work starts."""
