"""The power quantum difference operator and its algebra.

The first-order operator sends f to (f(q*t^n) - f(t)) / (q*t^n - t) away
from the fixed points of h(t) = q*t^n, and to the classical derivative
f'(t) on them.  Higher orders iterate the operator; the product rule
generalizes to a string-indexed quantum Leibniz formula; a mean-value form
of the chain rule survives even though the classical chain rule fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

from .errors import DomainError, NumericFault
from .expr import RealFunction, as_function
from .lattice import QuantumParams, default_singular_atol, h_apply, in_singular_set

_MACHINE_EPS = math.ulp(1.0)


@dataclass(frozen=True)
class DiffConfig:
    """Floating-point policy for the two-branch derivative definition.

    singular_atol: absolute tolerance for membership in the singular set.
    degenerate_gap: below this |q*t^n - t| the raw quotient amplifies
        roundoff and the classical derivative (the continuous limit) is
        used instead.
    fd_step_scale: central-difference step is fd_step_scale * max(1, |t|)
        when no symbolic classical derivative is available.
    """

    singular_atol: float = 1e-12
    degenerate_gap: float = 1e-9
    fd_step_scale: float = 1e-6

    def __post_init__(self):
        if self.singular_atol <= 0 or self.degenerate_gap <= 0 or self.fd_step_scale <= 0:
            raise DomainError("DiffConfig fields must be strictly positive")
        if self.degenerate_gap < 10 * _MACHINE_EPS:
            raise DomainError("degenerate_gap must be at least 10 machine epsilons")

    @classmethod
    def for_params(cls, params: QuantumParams) -> "DiffConfig":
        """Default config with the singular tolerance scaled to the horizon."""
        return cls(singular_atol=default_singular_atol(params))


def _config(params: QuantumParams, cfg: DiffConfig | None) -> DiffConfig:
    return cfg if cfg is not None else DiffConfig.for_params(params)


def d_nq(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    t: float,
    cfg: DiffConfig | None = None,
) -> float:
    """First-order power quantum derivative of f at t.

    Uses the difference quotient off the singular set; on it (or when the
    gap q*t^n - t has degenerated below cfg.degenerate_gap) falls back to
    the classical derivative, which is the continuous limit.
    """
    cfg = _config(params, cfg)
    fn = as_function(f)
    ht = h_apply(params, t)
    if in_singular_set(params, t, cfg.singular_atol) or abs(ht - t) < cfg.degenerate_gap:
        return fn.classical_derivative(t, step=cfg.fd_step_scale)
    value = (fn(ht) - fn(t)) / (ht - t)
    if not math.isfinite(value):
        raise NumericFault(f"non-finite difference quotient at t={t!r}")
    return value


def _memoized(fn: Callable[[float], float]) -> Callable[[float], float]:
    cache: dict[float, float] = {}

    def wrapped(s: float) -> float:
        v = cache.get(s)
        if v is None:
            v = fn(s)
            cache[s] = v
        return v

    return wrapped


def _derivative_function(
    params: QuantumParams, f: RealFunction, cfg: DiffConfig
) -> RealFunction:
    """The function s -> d_nq(f, s), memoized over its call points.

    Memoization keeps the recursive higher-order definition linear in the
    orbit length instead of exponential; the memo is local to the returned
    function, so concurrent callers never share state.
    """
    return RealFunction(body=_memoized(lambda s: d_nq(params, f, s, cfg)))


def d_nq_m(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    t: float,
    m: int,
    cfg: DiffConfig | None = None,
) -> float:
    """m-fold application of the derivative; order 0 returns f(t) exactly."""
    if not isinstance(m, int) or m < 0:
        raise DomainError(f"derivative order must be a nonnegative integer, got {m!r}")
    cfg = _config(params, cfg)
    fn = as_function(f)
    for _ in range(m):
        fn = _derivative_function(params, fn, cfg)
    return fn(t)


@dataclass(frozen=True)
class RuleResiduals:
    """Absolute defect of each first-order combination rule at one point.

    quotient is None when g(t) * g(q*t^n) vanishes and the quotient rule
    does not apply.
    """

    sum: float
    scalar: float
    product1: float
    product2: float
    quotient: float | None


_SCALAR_RULE_CONSTANT = 3.0


def rule_residuals(
    params: QuantumParams,
    f: "RealFunction | Callable[[float], float]",
    g: "RealFunction | Callable[[float], float]",
    t: float,
    cfg: DiffConfig | None = None,
) -> RuleResiduals:
    """|lhs - rhs| for the sum, scalar, both product forms, and quotient rules."""
    cfg = _config(params, cfg)
    fn, gn = as_function(f), as_function(g)
    ht = h_apply(params, t)
    ft, fht = fn(t), fn(ht)
    gt, ght = gn(t), gn(ht)
    df = d_nq(params, fn, t, cfg)
    dg = d_nq(params, gn, t, cfg)

    d_sum = d_nq(params, lambda s: fn(s) + gn(s), t, cfg)
    d_scaled = d_nq(params, lambda s: _SCALAR_RULE_CONSTANT * fn(s), t, cfg)
    d_prod = d_nq(params, lambda s: fn(s) * gn(s), t, cfg)

    quotient: float | None = None
    if gt * ght != 0.0:
        d_quot = d_nq(params, lambda s: fn(s) / gn(s), t, cfg)
        quotient = abs(d_quot - (df * gt - ft * dg) / (gt * ght))

    return RuleResiduals(
        sum=abs(d_sum - (df + dg)),
        scalar=abs(d_scaled - _SCALAR_RULE_CONSTANT * df),
        product1=abs(d_prod - (df * gt + fht * dg)),
        product2=abs(d_prod - (ft * dg + df * ght)),
        quotient=quotient,
    )


# --------------------------------------------------------------------------
# Operator strings and the quantum Leibniz formula
# --------------------------------------------------------------------------

#: Operator strings are plain str over this alphabet: 'D' applies the
#: quantum derivative, 'H' precomposes with h (i.e. maps u to u o h).
OP_ALPHABET = ("D", "H")


def leibniz_strings(m: int, k: int) -> list[str]:
    """All C(m, k) strings of length m with exactly k 'H' symbols,
    in lexicographic order."""
    if not isinstance(m, int) or m < 0:
        raise DomainError(f"string length must be a nonnegative integer, got {m!r}")
    if not isinstance(k, int) or not (0 <= k <= m):
        raise DomainError(f"H-count must satisfy 0 <= k <= {m}, got {k!r}")
    out = []
    for positions in combinations(range(m), k):
        chars = ["D"] * m
        for p in positions:
            chars[p] = "H"
        out.append("".join(chars))
    out.sort()
    return out


def apply_op_string(
    params: QuantumParams,
    s: str,
    f: "RealFunction | Callable[[float], float]",
    t: float,
    cfg: DiffConfig | None = None,
) -> float:
    """Apply an operator string to f and evaluate at t.

    Symbols act right to left, matching operator composition: in "HD" the
    derivative is taken first and the result is then precomposed with h,
    so ("HD" f)(t) = (Df)(h(t)).
    """
    cfg = _config(params, cfg)
    fn = as_function(f)
    for sym in reversed(s):
        if sym == "D":
            fn = _derivative_function(params, fn, cfg)
        elif sym == "H":
            inner = fn
            fn = RealFunction(body=lambda x, u=inner: u(h_apply(params, x)))
        else:
            raise DomainError(f"operator string may contain only D and H, got {s!r}")
    return fn(t)


@dataclass(frozen=True)
class LhsRhs:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _symbolic_derivative_chain(e, m: int):
    from .expr import diff_classical

    for _ in range(m):
        e = diff_classical(e, "t")
    return e


def leibniz_lhs_rhs(
    params: QuantumParams,
    f: RealFunction,
    g: RealFunction,
    t: float,
    m: int,
    cfg: DiffConfig | None = None,
) -> LhsRhs:
    """Both sides of the order-m quantum Leibniz formula for the product fg.

    Off the singular set the right side sums, over k, the string operators
    with k H-symbols applied to f times the k-th derivative of g.  On the
    singular set the formula collapses to the classical binomial Leibniz
    rule, so both sides are computed with classical symbolic derivatives
    (which requires AST-backed functions there).
    """
    if not isinstance(m, int) or m < 1:
        raise DomainError(f"Leibniz order must be a positive integer, got {m!r}")
    cfg = _config(params, cfg)
    fn, gn = as_function(f), as_function(g)

    if in_singular_set(params, t, cfg.singular_atol):
        from .expr import Bin, evaluate

        if callable(fn.body) or callable(gn.body):
            raise DomainError(
                "the singular-set Leibniz form needs symbolic classical "
                "derivatives; supply AST-backed functions"
            )
        product = Bin("*", fn.body, gn.body)
        lhs = evaluate(_symbolic_derivative_chain(product, m), {"t": t})
        rhs = 0.0
        for k in range(m + 1):
            dfk = evaluate(_symbolic_derivative_chain(fn.body, m - k), {"t": t})
            dgk = evaluate(_symbolic_derivative_chain(gn.body, k), {"t": t})
            rhs += math.comb(m, k) * dfk * dgk
        return LhsRhs(lhs=lhs, rhs=rhs)

    lhs = d_nq_m(params, lambda s: fn(s) * gn(s), t, m, cfg)
    rhs = 0.0
    for k in range(m + 1):
        string_sum = math.fsum(
            apply_op_string(params, s, fn, t, cfg) for s in leibniz_strings(m, k)
        )
        rhs += string_sum * d_nq_m(params, gn, t, k, cfg)
    return LhsRhs(lhs=lhs, rhs=rhs)


# --------------------------------------------------------------------------
# Mean-value chain rule witness
# --------------------------------------------------------------------------

_WITNESS_SCAN_SUBDIVISIONS = 64
_WITNESS_MAX_BISECTIONS = 200


def chain_rule_witness(
    params: QuantumParams,
    f_outer: "RealFunction | Callable[[float], float]",
    g_inner: "RealFunction | Callable[[float], float]",
    t: float,
    tol: float = 1e-10,
    cfg: DiffConfig | None = None,
) -> float:
    """Locate c between q*t^n and t with f'(g(c)) * Dg(t) = D(f o g)(t).

    Such a c exists whenever g is continuous on the closed gap interval and
    f is continuously differentiable.  A 64-point scan brackets a sign
    change of the defect, then bisection refines it; when both Dg(t) and
    D(f o g)(t) vanish, any c works and the midpoint is returned.
    """
    cfg = _config(params, cfg)
    if in_singular_set(params, t, cfg.singular_atol):
        raise DomainError(
            "no witness is needed on the singular set; the classical chain rule applies"
        )
    fo, gi = as_function(f_outer), as_function(g_inner)
    ht = h_apply(params, t)
    lo, hi = (ht, t) if ht <= t else (t, ht)

    dg = d_nq(params, gi, t, cfg)
    dfg = d_nq(params, lambda s: fo(gi(s)), t, cfg)
    if dg == 0.0 and dfg == 0.0:
        return 0.5 * (lo + hi)

    def defect(c: float) -> float:
        return fo.classical_derivative(gi(c), step=cfg.fd_step_scale) * dg - dfg

    prev_c = lo
    prev_d = defect(lo)
    if abs(prev_d) <= tol:
        return lo
    bracket: tuple[float, float, float, float] | None = None
    for i in range(1, _WITNESS_SCAN_SUBDIVISIONS + 1):
        c = lo + (hi - lo) * i / _WITNESS_SCAN_SUBDIVISIONS
        d = defect(c)
        if abs(d) <= tol:
            return c
        if prev_d * d < 0.0:
            bracket = (prev_c, prev_d, c, d)
            break
        prev_c, prev_d = c, d
    if bracket is None:
        raise NumericFault(
            f"no sign bracket for the chain-rule witness in [{lo!r}, {hi!r}]; "
            "a flat defect can defeat bisection even though a witness exists"
        )

    a, da, b, db = bracket
    for _ in range(_WITNESS_MAX_BISECTIONS):
        mid = 0.5 * (a + b)
        dm = defect(mid)
        if abs(dm) <= tol or mid == a or mid == b:
            return mid
        if da * dm < 0.0:
            b, db = mid, dm
        else:
            a, da = mid, dm
    raise NumericFault(f"chain-rule witness bisection did not reach tol={tol!r}")
