"""Shared exception types for data ingestion and file formats."""


class LaderError(Exception):
    """Base class for errors raised by this package."""


class ParseError(LaderError):
    """A text input file could not be parsed. Carries the offending location."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class ValidationError(LaderError):
    """Input data violates a documented invariant (duplicate ids, clicks > impressions, ...)."""


class FormatError(LaderError):
    """A binary file does not match the expected on-disk format."""
