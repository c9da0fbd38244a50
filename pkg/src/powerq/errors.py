"""Exception hierarchy shared by all powerq modules.

Numeric routines raise rather than return sentinel values; the CLI maps
each family to a fixed exit code (validation 2, numeric 3, expression 4).
"""

from __future__ import annotations


class PowerQError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PowerQError):
    """Arguments outside an operation's stated domain (bad bounds, bad n/q,
    point off the required orbit, vanishing divisor, ...)."""


class HorizonError(DomainError):
    """A point lies at or beyond the horizon +-theta, where forward orbits
    of the map t -> q*t^n no longer converge to zero."""


class NumericFault(PowerQError):
    """A computation produced a non-finite value or could not locate a
    numerically guaranteed object (e.g. a mean-value witness)."""


class ConvergenceError(NumericFault):
    """A series did not meet its tolerance within the configured number of
    terms, in a context where no partial result can be returned."""


class ExprError(PowerQError):
    """Base class for expression language errors."""


class ParseError(ExprError):
    """Syntax error at a byte offset, with the token kinds that were
    expected there."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += " (expected " + " or ".join(self.expected) + ")"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    """An identifier outside the fixed vocabulary {t,u,v,sin,cos,exp,ln,abs,sqrt}."""


class UnboundVariableError(ExprError):
    """Evaluation reached a variable with no binding."""


class EvalDomainError(ExprError):
    """Evaluation hit a real-domain fault (log of a non-positive number,
    zero to a negative power, negative base with fractional exponent,
    division by zero, ...)."""


class WeakDerivativeError(ExprError):
    """Symbolic differentiation reached abs(), which is only weakly
    differentiable; the caller decides how to proceed."""
