"""Exception types shared across the package."""


class WavefuseError(Exception):
    """Base class for all package errors."""


class ShapeError(WavefuseError):
    """Raised when array shapes are inconsistent with an operation's contract."""


class PnmParseError(WavefuseError):
    """Raised on malformed PNM input; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class FormatError(WavefuseError):
    """Raised on malformed binary artifacts (weights files, .bands files)."""
