"""Geometry of the map h(t) = q*t^n for odd n >= 1 and 0 < q < 1.

Iterating h from any point inside the horizon (-theta, theta) produces a
sequence that collapses to 0; outside it diverges.  The fixed points of h
(0 for n = 1, additionally +-theta for n >= 3) form the singular set on
which difference quotients degenerate.  Every other module works on the
orbits and truncated lattices produced here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError, HorizonError

#: Hard cap on orbit length when generating lattice points; the orbit has
#: accumulation point 0, so consumers always want a finite prefix.
MAX_ORBIT_STEPS = 10_000

#: Two nearby lattice points are merged when closer than this, relative to
#: their magnitude.
DEDUP_RTOL = 1e-14


@dataclass(frozen=True)
class QuantumParams:
    """The pair (n, q): n an odd positive integer, q strictly inside (0, 1)."""

    n: int
    q: float

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1 or self.n % 2 == 0:
            raise DomainError(f"n must be an odd positive integer, got {self.n!r}")
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"q must lie strictly in (0, 1), got {self.q!r}")


def theta(params: QuantumParams) -> float:
    """Horizon of the map: q**(1/(1-n)) for n >= 3, +inf for n = 1.

    For n >= 3 this is the positive fixed point of h; orbits started with
    |t| < theta contract to 0, orbits with |t| > theta diverge.
    """
    if params.n == 1:
        return math.inf
    return params.q ** (1.0 / (1.0 - params.n))


def singular_points(params: QuantumParams) -> tuple[float, ...]:
    """Fixed points of h: (0,) for n = 1, (-theta, 0, theta) otherwise."""
    if params.n == 1:
        return (0.0,)
    w = theta(params)
    return (-w, 0.0, w)


def default_singular_atol(params: QuantumParams) -> float:
    """Default absolute tolerance for membership in the singular set.

    Scaled by the horizon when it is finite; exact membership is a
    measure-zero event in floating point, so a tolerance is required.
    """
    w = theta(params)
    scale = max(1.0, w) if math.isfinite(w) else 1.0
    return 1e-12 * scale


def in_singular_set(params: QuantumParams, t: float, atol: float | None = None) -> bool:
    """Whether t lies within atol of a fixed point of h."""
    if atol is None:
        atol = default_singular_atol(params)
    return any(abs(t - s) <= atol for s in singular_points(params))


def bracket_k(k: int, n: int) -> int:
    """The exponent bookkeeping sum 1 + n + n^2 + ... + n^(k-1); 0 for k = 0.

    Satisfies [k+1] = n*[k] + 1.  Exact integer arithmetic (Python ints do
    not overflow).
    """
    if not isinstance(k, int) or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}")
    if not isinstance(n, int) or n < 1 or n % 2 == 0:
        raise DomainError(f"n must be an odd positive integer, got {n!r}")
    if n == 1:
        return k
    return (n**k - 1) // (n - 1)


def h_apply(params: QuantumParams, t: float) -> float:
    """One application of the map: q * t**n, sign preserved since n is odd."""
    if t < 0:
        return -params.q * (-t) ** params.n
    return params.q * t**params.n


def h_invert(params: QuantumParams, t: float) -> float:
    """Inverse map sign(t) * (|t|/q) ** (1/n), real for all t since n is odd."""
    if t < 0:
        return -((-t / params.q) ** (1.0 / params.n))
    return (t / params.q) ** (1.0 / params.n)


def h_iterate(params: QuantumParams, t: float, k: int) -> float:
    """k-fold composition of h (k >= 0) or of its inverse (k < 0).

    Composition is used instead of the closed form q**[k] * t**(n**k),
    whose factors overflow/underflow long before the composite does.
    h_iterate(t, 0) is exactly t.
    """
    x = float(t)
    if k >= 0:
        for _ in range(k):
            x = h_apply(params, x)
    else:
        for _ in range(-k):
            x = h_invert(params, x)
    return x


class OrbitLimit(Enum):
    """Long-run behaviour of the forward orbit h^k(t) as k grows."""

    DIVERGES_POS = "diverges_pos"
    TO_ZERO = "to_zero"
    DIVERGES_NEG = "diverges_neg"
    FIXED = "fixed"


def classify_limit(params: QuantumParams, t: float, atol: float | None = None) -> OrbitLimit:
    """Classify lim h^k(t): fixed on the singular set, 0 inside the horizon,
    +-inf outside."""
    if in_singular_set(params, t, atol):
        return OrbitLimit.FIXED
    w = theta(params)
    if t > w:
        return OrbitLimit.DIVERGES_POS
    if t < -w:
        return OrbitLimit.DIVERGES_NEG
    return OrbitLimit.TO_ZERO


@dataclass(frozen=True)
class LatticeInterval:
    """Truncated lattice between a and b: the forward orbits of both
    endpoints, cut off below truncation_tol, together with 0.

    points is sorted strictly ascending with no duplicates.
    """

    params: QuantumParams
    a: float
    b: float
    truncation_tol: float
    points: tuple[float, ...] = field(repr=False)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _forward_orbit(params: QuantumParams, x: float, tol: float) -> list[float]:
    """Forward orbit of x down to magnitude tol (capped at MAX_ORBIT_STEPS)."""
    out: list[float] = []
    t = float(x)
    for _ in range(MAX_ORBIT_STEPS):
        if abs(t) < tol:
            break
        out.append(t)
        t = h_apply(params, t)
    return out


def build_interval(
    params: QuantumParams, a: float, b: float, truncation_tol: float = 1e-12
) -> LatticeInterval:
    """Build the lattice {h^k(a)} u {h^k(b)} u {0}, truncated at truncation_tol.

    Requires a < b with both endpoints strictly inside the horizon; points
    closer than DEDUP_RTOL (relative) are merged.
    """
    if not (a < b):
        raise DomainError(f"interval requires a < b, got a={a!r}, b={b!r}")
    w = theta(params)
    for name, x in (("a", a), ("b", b)):
        if abs(x) >= w:
            raise HorizonError(
                f"endpoint {name}={x!r} lies at or beyond the horizon theta={w!r}"
            )
    if truncation_tol <= 0:
        raise DomainError("truncation_tol must be positive")

    raw = [0.0]
    raw.extend(_forward_orbit(params, a, truncation_tol))
    raw.extend(_forward_orbit(params, b, truncation_tol))
    raw.sort()

    points: list[float] = []
    for p in raw:
        if points and abs(p - points[-1]) <= DEDUP_RTOL * max(1.0, abs(p)):
            continue
        points.append(p)
    return LatticeInterval(
        params=params, a=a, b=b, truncation_tol=truncation_tol, points=tuple(points)
    )
