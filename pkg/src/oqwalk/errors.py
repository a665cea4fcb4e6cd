"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class OQWError(Exception):
    """Base class for all package errors."""


class NotHermitian(OQWError, ValueError):
    pass


class ConvergenceFailure(OQWError, RuntimeError):
    pass


class DimensionMismatch(OQWError, ValueError):
    pass


class NotTracePreserving(OQWError, ValueError):
    """Raised when ``L*L + R*R`` is not the identity within tolerance."""

    def __init__(self, residual: float, tol: float | None = None):
        self.residual = float(residual)
        self.tol = tol
        msg = f"coin is not trace preserving: max|L*L + R*R - I| = {self.residual:.3e}"
        if tol is not None:
            msg += f" > tol {tol:.1e}"
        super().__init__(msg)


class InvalidDensity(OQWError, ValueError):
    pass


class ParseError(OQWError, ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class NoInvariantState(OQWError, RuntimeError):
    pass


class NotInvariant(OQWError, ValueError):
    pass


class NotCommonEigenvector(OQWError, ValueError):
    pass


class WindowOverflow(OQWError, RuntimeError):
    pass


class InvalidStart(OQWError, ValueError):
    pass
