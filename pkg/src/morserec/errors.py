"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = [
    "MorserecError",
    "EnclosureError",
    "ContractViolation",
    "DependencyError",
    "UsageError",
]


class MorserecError(Exception):
    """Base class for all errors raised by this package."""


class EnclosureError(MorserecError):
    """A rigorous enclosure could not be produced (overflow, invalid input).

    Raised instead of silently returning a non-enclosing result; callers that
    can degrade conservatively (e.g. marking a grid cell as escaped) catch it.
    """


class ContractViolation(MorserecError):
    """An internal invariant that the caller relied on does not hold."""


class DependencyError(MorserecError):
    """A required input artifact is missing or unreadable."""


class UsageError(MorserecError):
    """Invalid command-line arguments or configuration."""
