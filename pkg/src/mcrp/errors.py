"""Exception types shared across the engine."""


class McrpError(Exception):
    """Base class for all engine errors."""


class DimensionError(McrpError):
    """Tensor shapes do not satisfy an operation's requirements."""


class ArchiveError(McrpError):
    """A model archive is missing, malformed, or inconsistent."""


class DumpFormatError(McrpError):
    """An MCRT tensor dump is malformed or truncated."""


class ImageIOError(McrpError):
    """An image file could not be read or has an unsupported format."""


class NumericalError(McrpError):
    """A non-finite value appeared where the contract forbids it."""
