"""Exact rational arithmetic helpers.

All core geometry works with `fractions.Fraction`.  Lengths in the model
metrics are square roots of rationals, so they are never materialized:
comparisons are carried out on exact squared values, and the few places
that need a rational stand-in for sqrt(q) use a dyadic upper rounding at
a fixed denominator (DYADIC_DENOM), which only ever rounds distances up.
"""

from __future__ import annotations

import math
from fractions import Fraction

# Denominator for dyadic roundings of irrational quantities (2**20).
DYADIC_BITS = 20
DYADIC_DENOM = 1 << DYADIC_BITS


def frac(x) -> Fraction:
    """Coerce to Fraction; strings like '0.5' parse exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # floats are binary-exact; accept them as the dyadic they are
        return Fraction(x)
    return Fraction(x)


def isqrt_ceil(n: int) -> int:
    """Smallest integer >= sqrt(n) for n >= 0."""
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def sqrt_ceil(q: Fraction, denom: int = DYADIC_DENOM) -> Fraction:
    """Dyadic upper bound for sqrt(q): least multiple of 1/denom >= sqrt(q)."""
    if q < 0:
        raise ValueError("sqrt of negative rational")
    # sqrt(a/b) <= m/denom  iff  a*denom^2 <= m^2 * b
    a, b = q.numerator, q.denominator
    m = isqrt_ceil(a * denom * denom // b)
    while m * m * b < a * denom * denom:
        m += 1
    return Fraction(m, denom)


def sqrt_floor(q: Fraction, denom: int = DYADIC_DENOM) -> Fraction:
    """Dyadic lower bound for sqrt(q)."""
    if q < 0:
        raise ValueError("sqrt of negative rational")
    a, b = q.numerator, q.denominator
    m = math.isqrt(a * denom * denom // b)
    while (m + 1) * (m + 1) * b <= a * denom * denom:
        m += 1
    return Fraction(m, denom)


def sqrt_leq(q1: Fraction, q2: Fraction) -> bool:
    """Exact test sqrt(q1) <= sqrt(q2) for nonnegative rationals."""
    return q1 <= q2


def sqrt_leq_scaled(q: Fraction, c: Fraction, r: Fraction) -> bool:
    """Exact test sqrt(q) <= c * r with c, r >= 0 rational."""
    return q <= c * c * r * r


def sqrt_leq_sum(qa: Fraction, qb: Fraction, qc: Fraction) -> bool:
    """Exact test sqrt(qa) <= sqrt(qb) + sqrt(qc).

    Squaring twice: a <= b + c + 2 sqrt(bc)  iff  a - b - c <= 2 sqrt(bc),
    which is automatic when the left side is negative and otherwise squares
    to (a - b - c)^2 <= 4 b c.
    """
    d = qa - qb - qc
    if d <= 0:
        return True
    return d * d <= 4 * qb * qc


def root_ceil(q: Fraction, r: int, denom: int = DYADIC_DENOM) -> Fraction:
    """Dyadic upper bound for q**(1/r): least m/denom with (m/denom)^r >= q."""
    if q < 0:
        raise ValueError("root of negative rational")
    if r < 1:
        raise ValueError("root order must be a positive integer")
    a, b = q.numerator, q.denominator
    # (m/denom)^r >= a/b  iff  m^r * b >= a * denom^r
    target = a * denom ** r
    lo, hi = 0, 1
    while hi ** r * b < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** r * b >= target:
            hi = mid
        else:
            lo = mid + 1
    return Fraction(lo, denom)


def pow_ceil(q: Fraction, e: Fraction, denom: int = DYADIC_DENOM) -> Fraction:
    """Dyadic upper bound for q**e with rational exponent e in (0, 1]."""
    e = Fraction(e)
    if not 0 < e <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    return root_ceil(q ** e.numerator, e.denominator, denom)


def pow_leq(x: Fraction, q: Fraction, e: Fraction) -> bool:
    """Exact test x <= q**e for x, q >= 0 and rational e > 0."""
    e = Fraction(e)
    return x ** e.denominator <= q ** e.numerator


def float_sqrt(q: Fraction) -> float:
    """Reporting view of sqrt(q)."""
    return math.sqrt(float(q))
