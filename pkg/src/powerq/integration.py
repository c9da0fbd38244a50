"""Power quantum integration: the inverse of the difference operator.

The antiderivative vanishing at 0 is the orbit series

    F(x) = sum_k (h^k(x) - h^(k+1)(x)) * f(h^k(x)),

a generalized Jackson sum over the forward orbit of x, which converges for
x inside the horizon whenever f is continuous at 0.  Definite integrals
are differences of two such series.  Terms are accumulated in ascending k
with compensated summation, so results are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .calculus import DiffConfig, d_nq
from .errors import DomainError, HorizonError
from .expr import RealFunction, as_function
from .lattice import QuantumParams, h_apply, theta


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation policy for the orbit series.

    Summation stops once consecutive_small successive terms satisfy
    |term| <= abs_tol + rel_tol * |partial sum| (and at least min_terms
    terms have been taken); max_terms is a hard cap, reported through the
    converged flag rather than an exception.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-300
    min_terms: int = 8
    max_terms: int = 100_000
    consecutive_small: int = 3

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("tolerances must be strictly positive")
        if not (1 <= self.min_terms <= self.max_terms <= 10**6):
            raise DomainError("need 1 <= min_terms <= max_terms <= 10**6")
        if self.consecutive_small < 1:
            raise DomainError("consecutive_small must be at least 1")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    terms_used: int
    last_term: float
    converged: bool


def _check_inside_horizon(params: QuantumParams, x: float, what: str) -> None:
    w = theta(params)
    if abs(x) >= w:
        raise HorizonError(
            f"{what}={x!r} lies at or beyond the horizon theta={w!r}; "
            "its orbit does not converge to 0"
        )


def antiderivative_at(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    t: float,
    cfg: SeriesConfig | None = None,
) -> IntegralResult:
    """Evaluate the antiderivative series of f, vanishing at 0, at t.

    Each term uses the orbit-difference form (h^k(t) - h^(k+1)(t)) * f(h^k(t)),
    which is algebraically the Jackson-type weight but never forms the
    separately overflowing powers t**(n**k).
    """
    cfg = cfg if cfg is not None else SeriesConfig()
    _check_inside_horizon(params, t, "t")
    fn = as_function(f)

    total = 0.0
    carry = 0.0
    x = float(t)
    small_run = 0
    term = 0.0
    k = 0
    converged = False
    while k < cfg.max_terms:
        xn = h_apply(params, x)
        term = (x - xn) * fn(x)
        # Kahan step: fold the compensation into the incoming term.
        y = term + carry
        s = total + y
        carry = y - (s - total)
        total = s
        k += 1
        if abs(term) <= cfg.abs_tol + cfg.rel_tol * abs(total):
            small_run += 1
            if small_run >= cfg.consecutive_small and k >= cfg.min_terms:
                converged = True
                break
        else:
            small_run = 0
        x = xn
    return IntegralResult(value=total, terms_used=k, last_term=term, converged=converged)


def integral(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    a: float,
    b: float,
    cfg: SeriesConfig | None = None,
) -> IntegralResult:
    """Definite integral from a to b: antiderivative at b minus at a.

    terms_used sums both legs; converged only if both legs converged;
    last_term is the larger of the two legs' final terms in magnitude.
    """
    upper = antiderivative_at(params, f, b, cfg)
    lower = antiderivative_at(params, f, a, cfg)
    return IntegralResult(
        value=upper.value - lower.value,
        terms_used=upper.terms_used + lower.terms_used,
        last_term=max(upper.last_term, lower.last_term, key=abs),
        converged=upper.converged and lower.converged,
    )


def ftc_residual(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    a: float,
    b: float,
    cfg: SeriesConfig | None = None,
    diff_cfg: DiffConfig | None = None,
) -> float:
    """|integral of Df from a to b - (f(b) - f(a))|, for f continuous at 0."""
    fn = as_function(f)

    def deriv(s: float) -> float:
        return d_nq(params, fn, s, diff_cfg)

    result = integral(params, deriv, a, b, cfg)
    return abs(result.value - (fn(b) - fn(a)))


@dataclass(frozen=True)
class LhsRhs:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def short_integral_identity(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    t: float,
    cfg: SeriesConfig | None = None,
) -> LhsRhs:
    """Integral over the single orbit step [t, q*t^n] vs (q*t^n - t) * f(t)."""
    _check_inside_horizon(params, t, "t")
    fn = as_function(f)
    ht = h_apply(params, t)
    lhs = integral(params, fn, t, ht, cfg).value
    rhs = (ht - t) * fn(t)
    return LhsRhs(lhs=lhs, rhs=rhs)


def by_parts_residual(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    g: "RealFunction | Callable[[float], float]",
    a: float,
    b: float,
    cfg: SeriesConfig | None = None,
    diff_cfg: DiffConfig | None = None,
) -> float:
    """Defect of integration by parts:
    |int f*Dg + int Df*(g o h) - (f(b)g(b) - f(a)g(a))|."""
    fn, gn = as_function(f), as_function(g)
    first = integral(params, lambda s: fn(s) * d_nq(params, gn, s, diff_cfg), a, b, cfg)
    second = integral(
        params,
        lambda s: d_nq(params, fn, s, diff_cfg) * gn(h_apply(params, s)),
        a,
        b,
        cfg,
    )
    boundary = fn(b) * gn(b) - fn(a) * gn(a)
    return abs(first.value + second.value - boundary)


# --------------------------------------------------------------------------
# Orbit-monotone integral bounds
# --------------------------------------------------------------------------


def _locate_on_orbit(
    params: QuantumParams, s: float, x: float, max_steps: int = 10_000
) -> int:
    """Index k with h^k(s) == x (within a relative tolerance), else raise."""
    t = float(s)
    for k in range(max_steps):
        if abs(t - x) <= 1e-12 * max(1.0, abs(x)):
            return k
        # Orbit magnitudes strictly decrease inside the horizon, so once
        # below |x| the point can no longer appear.
        if abs(t) < abs(x) or t == 0.0:
            break
        t = h_apply(params, t)
    raise DomainError(f"{x!r} does not lie on the forward orbit of {s!r}")


def monotonicity_check(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    g: "RealFunction | Callable[[float], float]",
    s: float,
    a: float,
    b: float,
    cfg: SeriesConfig | None = None,
    tol: float = 1e-10,
) -> bool:
    """Check |int_a^b f| <= int_a^b g (+ int g >= 0 when g >= 0 on the orbit).

    Valid when 0 <= |f| <= g holds on the forward orbit of s and a, b are
    both on that orbit with a < b; the bound hypothesis is verified by
    sampling the truncated orbit and a violation is a domain error.
    """
    _check_inside_horizon(params, s, "s")
    if not (a < b):
        raise DomainError(f"bound check requires a < b, got a={a!r}, b={b!r}")
    _locate_on_orbit(params, s, a)
    _locate_on_orbit(params, s, b)
    fn, gn = as_function(f), as_function(g)

    g_nonneg = True
    t = float(s)
    for _ in range(2_000):
        gv = gn(t)
        if abs(fn(t)) > gv + tol:
            raise DomainError(
                f"pointwise bound |f| <= g fails on the orbit at t={t!r}"
            )
        if gv < -tol:
            g_nonneg = False
        if abs(t) < 1e-30:
            break
        t = h_apply(params, t)

    int_f = integral(params, fn, a, b, cfg).value
    int_g = integral(params, gn, a, b, cfg).value
    ok = abs(int_f) <= int_g + tol
    if g_nonneg:
        ok = ok and int_g >= -tol
    return ok


# --------------------------------------------------------------------------
# The |integral of f| vs integral of |f| counterexample (n = 1)
# --------------------------------------------------------------------------


def counterexample_function(q: float) -> RealFunction:
    """The sawtooth on [0, 1] whose signed integral beats its absolute one.

    On each band [q^(m+1), q^m] the function rises linearly from -1 at the
    left edge to +1 at q^m (1+q)/2, then falls back to -1 at the right
    edge; f(0) = 0.  Its n=1 quantum integral from (1+q)/2 to 1 equals
    -(3+q)/2 while the integral of |f| is only (1-q)/2: the orbit of 1
    samples only the valleys of f, the orbit of (1+q)/2 only the peaks.
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie strictly in (0, 1), got {q!r}")

    # Powers of q by successive multiplication, so breakpoints coincide
    # bit-for-bit with orbit points generated the same way.
    powers = [1.0]

    def _power(m: int) -> float:
        while len(powers) <= m:
            powers.append(powers[-1] * q)
        return powers[m]

    log_q = math.log(q)

    def body(x: float) -> float:
        if x == 0.0:
            return 0.0
        if x < 0.0 or x > 1.0:
            raise DomainError(f"counterexample function is defined on [0, 1], got {x!r}")
        m = max(0, int(math.log(x) / log_q) - 2)
        while _power(m + 1) > x:
            m += 1
        while _power(m) < x:
            m -= 1
        qm = _power(m)
        mid = qm * (1.0 + q) / 2.0
        scale = x / qm
        if x <= mid:
            return (4.0 * scale - (1.0 + 3.0 * q)) / (1.0 - q)
        return 4.0 * (1.0 - scale) / (1.0 - q) - 1.0

    return RealFunction(body=body, name=f"counterexample(q={q!r})")
