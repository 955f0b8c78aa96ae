"""Exception types raised by the smallcell library.

Each one also derives from the builtin a caller would naturally catch,
so ``except ValueError`` keeps working around parameter problems.
"""
from __future__ import annotations

from typing import Any, Optional


class SmallCellError(Exception):
    """Base for all library errors."""


class DomainError(SmallCellError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedDomainError(DomainError):
    """Arguments are valid mathematically but outside the supported regime."""


class UnitConversionError(DomainError):
    """Unknown or mismatched unit pair."""


class QuadratureConvergenceError(SmallCellError, RuntimeError):
    """Numerical integration did not converge within its budget."""

    def __init__(self, message: str, partial: Any = None) -> None:
        super().__init__(message)
        self.partial = partial


class ConfigError(SmallCellError, ValueError):
    """Invalid run configuration, with the offending line/field when known."""

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None) -> None:
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line
