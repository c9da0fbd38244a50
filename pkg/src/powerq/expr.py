"""A minimal expression language for real functions of t and integrands of
(t, u, v): recursive-descent parser, evaluator, and symbolic classical
differentiator.

Grammar (EBNF), with precedence ^ > unary- > *,/ > +,- and ^ right-associative:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

IDENT is one of the variables {t, u, v} or the unary functions
{sin, cos, exp, ln, abs, sqrt}.  NUMBER is a decimal with optional exponent.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

from .errors import (
    EvalDomainError,
    ParseError,
    UnboundVariableError,
    UnknownIdentifierError,
    WeakDerivativeError,
)

VARIABLES = ("t", "u", "v")
FUNCTIONS = ("sin", "cos", "exp", "ln", "abs", "sqrt")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Lit, Var, Neg, Bin, Call]


# --------------------------------------------------------------------------
# Lexer / parser
# --------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER, IDENT, or the operator/paren character, or END
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, size = 0, len(text)
    while i < size:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            m = _NUMBER_RE.match(text, i)
            if not m:
                raise ParseError("malformed number", i, ("NUMBER",))
            tokens.append(_Token("NUMBER", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            name = m.group()
            if name not in VARIABLES and name not in FUNCTIONS:
                raise UnknownIdentifierError(f"unknown identifier {name!r}", i)
            tokens.append(_Token("IDENT", name, i))
            i = m.end()
            continue
        if ch in "+-*/^()":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("END", "", size))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, kind: str) -> _Token:
        if self.current.kind != kind:
            raise ParseError(
                f"unexpected token {self.current.text or '<end>'!r}",
                self.current.offset,
                (kind,),
            )
        return self._advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.current.kind != "END":
            raise ParseError(
                f"trailing input {self.current.text!r}",
                self.current.offset,
                ("+", "-", "*", "/", "^", "END"),
            )
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.current.kind in ("+", "-"):
            op = self._advance().kind
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.current.kind in ("*", "/"):
            op = self._advance().kind
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.current.kind == "-":
            self._advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.current.kind == "^":
            self._advance()
            return Bin("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.current
        if tok.kind == "NUMBER":
            self._advance()
            return Lit(float(tok.text))
        if tok.kind == "IDENT":
            self._advance()
            if tok.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(tok.text, arg)
            return Var(tok.text)
        if tok.kind == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise ParseError(
            f"unexpected token {tok.text or '<end>'!r}",
            tok.offset,
            ("NUMBER", "IDENT", "(", "-"),
        )


def parse(text: str) -> Expr:
    """Parse text into an AST, raising ParseError with a byte offset."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0, ("NUMBER", "IDENT", "(", "-"))
    return _Parser(_tokenize(text)).parse()


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def _apply_pow(base: float, expo: float) -> float:
    if base < 0.0:
        if expo != math.floor(expo) or math.isinf(expo):
            raise EvalDomainError(
                f"negative base {base!r} with non-integer exponent {expo!r}"
            )
        k = int(expo)
        try:
            mag = abs(base) ** float(abs(k))
        except OverflowError:
            mag = math.inf
        if k < 0:
            if mag == 0.0:
                raise EvalDomainError("zero to a negative power")
            mag = 1.0 / mag
        return -mag if k % 2 else mag
    if base == 0.0 and expo < 0.0:
        raise EvalDomainError("zero to a negative power")
    try:
        return base**expo
    except OverflowError:
        return math.inf


def _call_builtin(name: str, x: float) -> float:
    if name == "sin":
        return math.sin(x)
    if name == "cos":
        return math.cos(x)
    if name == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if name == "ln":
        if x <= 0.0:
            raise EvalDomainError(f"ln of non-positive value {x!r}")
        return math.log(x)
    if name == "abs":
        return abs(x)
    if name == "sqrt":
        if x < 0.0:
            raise EvalDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    raise EvalDomainError(f"unknown function {name!r}")


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate e with every free variable bound; IEEE overflow to inf."""
    match e:
        case Lit(value):
            return value
        case Var(name):
            try:
                return float(bindings[name])
            except KeyError:
                raise UnboundVariableError(f"variable {name!r} is not bound") from None
        case Neg(arg):
            return -evaluate(arg, bindings)
        case Bin("+", a, b):
            return evaluate(a, bindings) + evaluate(b, bindings)
        case Bin("-", a, b):
            return evaluate(a, bindings) - evaluate(b, bindings)
        case Bin("*", a, b):
            return evaluate(a, bindings) * evaluate(b, bindings)
        case Bin("/", a, b):
            denom = evaluate(b, bindings)
            if denom == 0.0:
                raise EvalDomainError("division by zero")
            return evaluate(a, bindings) / denom
        case Bin("^", a, b):
            return _apply_pow(evaluate(a, bindings), evaluate(b, bindings))
        case Call(func, arg):
            return _call_builtin(func, evaluate(arg, bindings))
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expr) -> frozenset[str]:
    match e:
        case Lit(_):
            return frozenset()
        case Var(name):
            return frozenset((name,))
        case Neg(arg):
            return free_variables(arg)
        case Bin(_, a, b):
            return free_variables(a) | free_variables(b)
        case Call(_, arg):
            return free_variables(arg)
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Canonical serialization (used for round-trip stability tests and reports)
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    match e:
        case Bin("+" | "-", _, _):
            return _PREC_ADD
        case Bin("*" | "/", _, _):
            return _PREC_MUL
        case Neg(_):
            return _PREC_NEG
        case Bin("^", _, _):
            return _PREC_POW
        case _:
            return _PREC_ATOM


def to_text(e: Expr) -> str:
    """Serialize to the surface syntax; parse(to_text(parse(s))) == parse(s)."""

    def wrap(child: Expr, minimum: int) -> str:
        s = to_text(child)
        return f"({s})" if _prec(child) < minimum else s

    match e:
        case Lit(value):
            return repr(value)
        case Var(name):
            return name
        case Neg(arg):
            return "-" + wrap(arg, _PREC_NEG)
        case Bin("+" as op, a, b) | Bin("-" as op, a, b):
            return f"{wrap(a, _PREC_ADD)} {op} {wrap(b, _PREC_ADD + 1)}"
        case Bin("*" as op, a, b) | Bin("/" as op, a, b):
            return f"{wrap(a, _PREC_MUL)}{op}{wrap(b, _PREC_MUL + 1)}"
        case Bin("^", a, b):
            return f"{wrap(a, _PREC_ATOM)}^{wrap(b, _PREC_NEG)}"
        case Call(func, arg):
            return f"{func}({to_text(arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Symbolic classical differentiation (constant folding only)
# --------------------------------------------------------------------------


def _is_lit(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Lit) and (value is None or e.value == value)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Lit):
        return Lit(-a.value)
    return Neg(a)


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value + b.value)
    if _is_lit(a, 0.0):
        return b
    if _is_lit(b, 0.0):
        return a
    return Bin("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value - b.value)
    if _is_lit(b, 0.0):
        return a
    if _is_lit(a, 0.0):
        return _neg(b)
    return Bin("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit(a.value * b.value)
    if _is_lit(a, 0.0) or _is_lit(b, 0.0):
        return Lit(0.0)
    if _is_lit(a, 1.0):
        return b
    if _is_lit(b, 1.0):
        return a
    return Bin("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_lit(a, 0.0) and not _is_lit(b, 0.0):
        return Lit(0.0)
    if _is_lit(b, 1.0):
        return a
    if isinstance(a, Lit) and isinstance(b, Lit) and b.value != 0.0:
        return Lit(a.value / b.value)
    return Bin("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_lit(b, 1.0):
        return a
    if _is_lit(b, 0.0):
        return Lit(1.0)
    return Bin("^", a, b)


def diff_classical(e: Expr, var: str) -> Expr:
    """Exact symbolic classical derivative with respect to var.

    No simplification beyond constant folding; correctness is established
    by evaluation against finite differences, not by normal form.
    Differentiating abs raises WeakDerivativeError.
    """
    if var not in VARIABLES:
        raise EvalDomainError(f"cannot differentiate with respect to {var!r}")
    match e:
        case Lit(_):
            return Lit(0.0)
        case Var(name):
            return Lit(1.0) if name == var else Lit(0.0)
        case Neg(arg):
            return _neg(diff_classical(arg, var))
        case Bin("+", a, b):
            return _add(diff_classical(a, var), diff_classical(b, var))
        case Bin("-", a, b):
            return _sub(diff_classical(a, var), diff_classical(b, var))
        case Bin("*", a, b):
            da, db = diff_classical(a, var), diff_classical(b, var)
            return _add(_mul(da, b), _mul(a, db))
        case Bin("/", a, b):
            da, db = diff_classical(a, var), diff_classical(b, var)
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Lit(2.0)))
        case Bin("^", base, expo):
            dbase = diff_classical(base, var)
            if isinstance(expo, Lit) or not (var in free_variables(expo)):
                dexpo_free = _mul(
                    _mul(expo, _pow(base, _sub(expo, Lit(1.0)))), dbase
                )
                return dexpo_free
            # general a^b = exp(b ln a)
            dexpo = diff_classical(expo, var)
            inner = _add(_mul(dexpo, Call("ln", base)), _mul(expo, _div(dbase, base)))
            return _mul(_pow(base, expo), inner)
        case Call("sin", arg):
            return _mul(Call("cos", arg), diff_classical(arg, var))
        case Call("cos", arg):
            return _neg(_mul(Call("sin", arg), diff_classical(arg, var)))
        case Call("exp", arg):
            return _mul(Call("exp", arg), diff_classical(arg, var))
        case Call("ln", arg):
            return _div(diff_classical(arg, var), arg)
        case Call("sqrt", arg):
            return _div(diff_classical(arg, var), _mul(Lit(2.0), Call("sqrt", arg)))
        case Call("abs", _):
            raise WeakDerivativeError(
                "abs is only weakly differentiable; supply a derivative explicitly"
            )
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Callable wrappers used throughout the package
# --------------------------------------------------------------------------

ScalarFn = Callable[[float], float]
TernaryFn = Callable[[float, float, float], float]

DEFAULT_FD_STEP_SCALE = 1e-6


@dataclass(frozen=True)
class RealFunction:
    """An evaluable real -> real mapping over the variable t.

    body is either an AST or a native callable; derivative, when present,
    is the classical derivative (needed on the singular set, where the
    difference quotient degenerates).
    """

    body: Expr | ScalarFn
    derivative: Expr | ScalarFn | None = None
    name: str | None = None

    def __post_init__(self):
        if not callable(self.body):
            extra = free_variables(self.body) - {"t"}
            if extra:
                raise EvalDomainError(
                    f"function of t may not reference {sorted(extra)}"
                )

    @classmethod
    def from_text(cls, text: str, name: str | None = None) -> "RealFunction":
        body = parse(text)
        try:
            deriv: Expr | None = diff_classical(body, "t")
        except WeakDerivativeError:
            deriv = None
        return cls(body=body, derivative=deriv, name=name)

    def __call__(self, t: float) -> float:
        if callable(self.body):
            return float(self.body(t))
        return evaluate(self.body, {"t": t})

    def classical_derivative(self, t: float, step: float | None = None) -> float:
        """Classical f'(t): symbolic when available, else a central difference
        with step scaled to max(1, |t|)."""
        if self.derivative is not None:
            if callable(self.derivative):
                return float(self.derivative(t))
            return evaluate(self.derivative, {"t": t})
        h = (step if step is not None else DEFAULT_FD_STEP_SCALE) * max(1.0, abs(t))
        return (self(t + h) - self(t - h)) / (2.0 * h)


def as_function(f: "RealFunction | Expr | ScalarFn") -> RealFunction:
    """Coerce an AST or bare callable into a RealFunction."""
    if isinstance(f, RealFunction):
        return f
    if isinstance(f, (Lit, Var, Neg, Bin, Call)):
        try:
            deriv: Expr | None = diff_classical(f, "t")
        except WeakDerivativeError:
            deriv = None
        return RealFunction(body=f, derivative=deriv)
    if callable(f):
        return RealFunction(body=f)
    raise TypeError(f"cannot interpret {f!r} as a real function")


@dataclass(frozen=True)
class Lagrangian:
    """Integrand f(t, u, v) with its partial derivatives in u and v.

    u plays the role of the trajectory value at the stepped point q*t^n and
    v the role of its quantum derivative.
    """

    body: Expr | TernaryFn
    d2: Expr | TernaryFn
    d3: Expr | TernaryFn

    @classmethod
    def from_text(cls, text: str) -> "Lagrangian":
        body = parse(text)
        return cls(
            body=body,
            d2=diff_classical(body, "u"),
            d3=diff_classical(body, "v"),
        )

    def _eval(self, node: Expr | TernaryFn, t: float, u: float, v: float) -> float:
        if callable(node):
            return float(node(t, u, v))
        return evaluate(node, {"t": t, "u": u, "v": v})

    def __call__(self, t: float, u: float, v: float) -> float:
        return self._eval(self.body, t, u, v)

    def du(self, t: float, u: float, v: float) -> float:
        return self._eval(self.d2, t, u, v)

    def dv(self, t: float, u: float, v: float) -> float:
        return self._eval(self.d3, t, u, v)
