"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: InputError -> 1, DegenerateDataError -> 2.
"""

from __future__ import annotations


class SnoringError(Exception):
    """Base class for all toolkit errors."""


class InputError(SnoringError):
    """Unusable input: unreadable repository, malformed file, bad config."""


class DegenerateDataError(SnoringError):
    """Data too degenerate to compute the requested quantity."""
