"""Exception types raised across the package.

Every error derives from :class:`TranstackError` so callers (the CLI in
particular) can catch the whole family and report the originating name.
"""

from __future__ import annotations


class TranstackError(Exception):
    """Base class for all package errors."""


class ParseError(TranstackError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyCorpus(TranstackError, ValueError):
    pass


class DegenerateRange(TranstackError, ValueError):
    pass


class SeriesTooShort(TranstackError, ValueError):
    pass


class DimensionMismatch(TranstackError, ValueError):
    pass


class EmptyDataset(TranstackError, ValueError):
    pass


class LengthMismatch(TranstackError, ValueError):
    pass


class EmptyInput(TranstackError, ValueError):
    pass


class UsageError(TranstackError):
    """Bad command line. Carries the usage synopsis for display."""

    def __init__(self, message: str, usage: str = ""):
        self.usage = usage
        super().__init__(message)
