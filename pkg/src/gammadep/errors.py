"""Single exception type carrying a stable machine-readable code.

Every contract violation raised by this package is a :class:`GammadepError`
whose ``code`` identifies the failure (``ROW_MISMATCH``, ``TOO_SMALL``, ...)
independently of the human-readable message. The CLI maps any
:class:`GammadepError` to exit status 3.
"""

from __future__ import annotations


class GammadepError(Exception):
    """Error with a stable ``code`` string plus a diagnostic message."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


def fail(code: str, message: str = "") -> "GammadepError":
    """Build a GammadepError; kept as a helper so raise sites stay one line."""
    return GammadepError(code, message)
