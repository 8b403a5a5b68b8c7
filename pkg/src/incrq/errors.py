"""Exception hierarchy shared by every incrq module."""

from __future__ import annotations

from typing import Any, Sequence


class IncrqError(Exception):
    """Base class for all errors raised by incrq."""


class MonoidError(IncrqError):
    """Invalid use of a monoid or merge form (missing identity, bad carrier)."""


class BoxConflict(MonoidError):
    """Two unequal values were merged with the invariant monoid.

    Both values are kept so callers can report which key changed.
    """

    def __init__(self, left: Any, right: Any, message: str = "invariant value changed"):
        self.left = left
        self.right = right
        self.message = message
        super().__init__(f"{message}: {left!r} vs {right!r}")


class EvalError(IncrqError):
    """Runtime failure while evaluating a term (type mismatch, unbound name, ...)."""


class TermError(IncrqError):
    """A term is structurally invalid for the requested operation.

    ``location`` is a path of child labels from the root to the offending node.
    """

    def __init__(self, message: str, location: Sequence[str] = (), subterm: str | None = None):
        self.reason = message
        self.location = tuple(location)
        self.subterm = subterm
        where = "/".join(self.location) or "<root>"
        text = f"{message} (at {where})"
        if subterm:
            text += f": {subterm}"
        super().__init__(text)


class NotIncrementalizable(TermError):
    """Factoring could not isolate a homomorphic core."""


class InferenceError(TermError):
    """Monoid inference failed where success was required."""


class DeletionError(IncrqError):
    """A deletion batch cannot be applied (unsupported monoid or not a subset)."""


class DSLSyntaxError(IncrqError):
    """Plan text could not be parsed."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class DataFormatError(IncrqError):
    """A batch file row failed to parse against its schema."""

    def __init__(self, message: str, row: int | None = None, path: str | None = None):
        self.row = row
        self.path = path
        prefix = f"{path}: " if path else ""
        suffix = f" (row {row})" if row is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")
