"""Gamma and hypergeometric functions used by the manufactured source terms.

All routines accept and return Python floats. Hypergeometric series are summed
directly; for ``x > 0.5`` the Gauss function is first transformed so that the
summed series converges quickly (see :func:`hyp2f1`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import digamma

from .exceptions import AccuracyError, DomainError

__all__ = ["SeriesControl", "gamma_fn", "rgamma", "hyp2f1", "hyp1f1", "a_const"]


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for power series.

    Parameters
    ----------
    rel_tol : float
        Stop when the last term is below ``rel_tol`` times the running sum.
    max_terms : int
        Give up after this many terms.
    """

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_CONTROL = SeriesControl()

# Lanczos approximation, g = 7, nine coefficients (double precision set).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _lanczos(x: float) -> float:
    # valid for x >= 0.5
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (x + k)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def gamma_fn(x: float) -> float:
    """Gamma function for real ``x`` away from the poles.

    Uses integer recurrence down to ``[1, 2)`` when that is short, a Lanczos
    approximation otherwise, and the reflection formula for ``x < 0.5``.
    """
    x = float(x)
    if _is_nonpositive_int(x):
        raise DomainError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    if x.is_integer() and x <= 171:
        return float(math.factorial(int(x) - 1))
    if x < 10.0:
        # shift into [1, 2) where the approximation is most accurate
        shift = 1.0
        while x >= 2.0:
            x -= 1.0
            shift *= x
        return shift * _lanczos(x)
    return _lanczos(x)


def rgamma(x: float) -> float:
    """Reciprocal Gamma, zero at the poles."""
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / gamma_fn(x)


def _sum_2f1(a, b, c, x, control):
    term = 1.0
    total = 1.0
    for k in range(control.max_terms):
        if term == 0.0:
            return total
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x
        total += term
        if abs(term) <= control.rel_tol * abs(total) * 1e-2 and k > 2:
            return total
    raise AccuracyError(
        f"2F1({a}, {b}; {c}; {x}) series did not converge in {control.max_terms} terms",
        estimate=total,
    )


def hyp2f1(a: float, b: float, c: float, x: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Gauss hypergeometric function for ``0 <= x < 1``.

    For ``x <= 0.5`` the defining series is summed directly. Beyond that the
    argument is transformed first, in this order of preference:

    * Pfaff ``(1-x)^{-b} 2F1(c-a, b; c; x/(x-1))`` when it terminates,
    * the direct series when it terminates (``a`` or ``b`` a nonpositive integer),
    * the ``1-x`` connection formula when ``c-a-b`` is not an integer,
    * Euler ``(1-x)^{c-a-b} 2F1(c-a, c-b; c; x)`` or the direct series,
      whichever has a positive parameter excess and so converges at ``x = 1``.
    """
    a, b, c, x = float(a), float(b), float(c), float(x)
    if _is_nonpositive_int(c):
        raise DomainError(f"2F1 undefined for c = {c}")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"2F1 argument must lie in [0, 1), got {x}")
    if x == 0.0:
        return 1.0
    if x <= 0.5:
        return _sum_2f1(a, b, c, x, control)

    # Pfaff transformation, usable whenever the transformed series terminates
    for p, other in ((a, b), (b, a)):
        if _is_nonpositive_int(c - p):
            return (1.0 - x) ** (-other) * _sum_2f1(c - p, other, c, x / (x - 1.0), control)
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        return _sum_2f1(a, b, c, x, control)

    s = c - a - b
    if not s.is_integer():
        y = 1.0 - x
        t1 = gamma_fn(c) * gamma_fn(s) * rgamma(c - a) * rgamma(c - b)
        t2 = gamma_fn(c) * gamma_fn(-s) * rgamma(a) * rgamma(b)
        out = 0.0
        if t1 != 0.0:
            out += t1 * _sum_2f1(a, b, 1.0 - s, y, control)
        if t2 != 0.0:
            out += t2 * y**s * _sum_2f1(c - a, c - b, 1.0 + s, y, control)
        return out
    if s < 0:
        # Euler: the transformed function has excess -s > 0
        return (1.0 - x) ** s * _log_case(c - a, c - b, int(-s), 1.0 - x, control)
    return _log_case(a, b, int(s), 1.0 - x, control)


def _log_case(a, b, m, y, control):
    """2F1(a, b; a+b+m; 1-y) for integer m >= 0 via the logarithmic connection formula."""
    c = a + b + m
    head = 0.0
    if m > 0:
        coef = gamma_fn(m) * gamma_fn(c) * rgamma(a + m) * rgamma(b + m)
        term = 1.0
        for n in range(m):
            head += term
            term *= (a + n) * (b + n) / ((n + 1.0) * (1.0 - m + n)) * y if n < m - 1 else 0.0
        head *= coef
    pref = gamma_fn(c) * rgamma(a) * rgamma(b) * (-1.0) ** m / math.factorial(m)
    log_y = math.log(y)
    term = 1.0  # (a+m)_n (b+m)_n / (n! (m+1)_n) y^n
    total = 0.0
    for n in range(control.max_terms):
        bracket = (
            log_y
            - digamma(n + 1.0)
            - digamma(n + m + 1.0)
            + digamma(a + n + m)
            + digamma(b + n + m)
        )
        inc = term * bracket
        total += inc
        if abs(inc) <= control.rel_tol * 1e-2 * max(abs(total), abs(head)) and n > 2:
            return head - pref * y**m * total
        term *= (a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0)) * y
    raise AccuracyError("2F1 logarithmic-case series did not converge", estimate=head - pref * y**m * total)


def hyp1f1(a: float, b: float, x: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Kummer confluent hypergeometric function.

    Negative arguments go through Kummer's transformation
    ``e^x 1F1(b-a; b; -x)`` to avoid cancellation in the alternating series.
    """
    a, b, x = float(a), float(b), float(x)
    if _is_nonpositive_int(b):
        raise DomainError(f"1F1 undefined for b = {b}")
    if x == 0.0:
        return 1.0
    if x < 0.0 and not _is_nonpositive_int(a):
        return math.exp(x) * hyp1f1(b - a, b, -x, control)
    term = 1.0
    total = 1.0
    for k in range(control.max_terms):
        term *= (a + k) / ((b + k) * (k + 1.0)) * x
        total += term
        if term == 0.0 or (abs(term) <= control.rel_tol * abs(total) * 1e-2 and k > abs(x)):
            return total
    raise AccuracyError(f"1F1({a}; {b}; {x}) series did not converge", estimate=total)


def a_const(s: float, g: float) -> float:
    """Constant ``2^{2s} Γ(s+g) Γ(s+1/2) / (√π Γ(g))`` of the fractional source terms."""
    return 4.0**s * gamma_fn(s + g) * gamma_fn(s + 0.5) / (math.sqrt(math.pi) * gamma_fn(g))
