"""Exception types shared across the package."""


class MvqError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(MvqError):
    """Invalid or incomplete run configuration (e.g. missing dual-domain targets)."""


class FormatError(MvqError):
    """Base class for binary file format errors."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this reader does not understand."""


class TruncatedFileError(FormatError):
    """Declared sizes disagree with the actual payload length."""


class ConfigParseError(MvqError):
    """Malformed plain-text configuration file."""


class UsageError(MvqError):
    """Bad command-line invocation."""
