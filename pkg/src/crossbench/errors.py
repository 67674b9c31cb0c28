"""Exception types shared across the package."""


class CrossbenchError(Exception):
    """Base class for crossbench errors."""


class CodecError(CrossbenchError):
    """Raised when a byte block cannot be encoded or decoded."""


class FormatError(CrossbenchError):
    """Raised when a store file is malformed, truncated or corrupt."""
