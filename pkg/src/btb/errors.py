"""Exception types shared across the package."""


class BtbError(Exception):
    """Base class for all errors raised by btb."""


class FormatError(BtbError, ValueError):
    """Malformed image file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(BtbError, ValueError):
    pass


class DomainError(BtbError, ValueError):
    pass


class ConfigError(BtbError, ValueError):
    pass
