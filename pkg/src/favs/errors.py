# Licensed under the MIT License

"""Exceptions raised by favs.

All exceptions derive from :class:`FavsError`. Shape and validation
problems additionally derive from :class:`ValueError`; problems reading or
writing FTEN1 containers derive from :class:`FtenError`.
"""


class FavsError(Exception):
    """Base class for all favs errors."""


class ShapeError(FavsError, ValueError):
    """Raised when tensor extents do not match."""


class ValidationError(FavsError, ValueError):
    """Raised when an argument, parameter set or input file is invalid."""


class ConfigError(ValidationError):
    """Raised for malformed config files and out-of-range config values."""


class FtenError(FavsError):
    """Base class for FTEN1 container errors."""


class BadMagicError(FtenError):
    """The container does not start with the FTEN magic."""


class UnsupportedVersionError(FtenError):
    """The container version byte is not supported."""


class TruncatedError(FtenError):
    """The container ends before a header or payload is complete."""


class DuplicateNameError(FtenError):
    """Two entries share the same name."""


class InvalidNameError(FtenError):
    """An entry name is empty, not ASCII or contains NUL."""


class UnknownDtypeError(FtenError):
    """An entry uses a dtype code other than 0 (f64) or 1 (complex f64)."""


class UnsupportedRankError(FtenError):
    """An entry declares more than 64 dimensions."""


class TrailingDataError(FtenError):
    """Bytes remain after the last declared entry."""


def shape_mismatch(what: str, a, b) -> ShapeError:
    """Build a ShapeError naming both shapes."""
    return ShapeError(f"{what}: shape {tuple(a)} does not match {tuple(b)}")
