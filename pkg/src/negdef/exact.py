"""Certified comparisons between rationals and real powers ``n ** e``.

Exponents arrive as Python floats (exact dyadic rationals) or Fractions.
Powers are enclosed in mpmath intervals whose precision doubles until the
comparison is decided. When ``n ** e`` is itself rational the enclosure can
never separate it from an equal rational, so that case is detected up front
and settled in exact arithmetic.
"""

import math
from fractions import Fraction

from mpmath import iv
from mpmath.libmp import to_rational

_START_PREC = 64
_MAX_PREC = 1 << 14


def _as_fraction(x):
    return x if isinstance(x, Fraction) else Fraction(x)


def _iroot(n, q):
    """Integer q-th root of n if n is a perfect q-th power, else None."""
    if q > n.bit_length():
        return None
    lo, hi = 1, 1 << (n.bit_length() // q + 1)
    while lo <= hi:
        mid = (lo + hi) // 2
        v = mid**q
        if v == n:
            return mid
        if v < n:
            lo = mid + 1
        else:
            hi = mid - 1
    return None


def exact_pow(n, e):
    """Return ``n ** e`` as a Fraction when it is rational, else None."""
    e = _as_fraction(e)
    if n == 1 or e == 0:
        return Fraction(1)
    p, q = e.numerator, e.denominator
    if q == 1:
        return Fraction(n) ** p
    r = _iroot(n, q)
    if r is None:
        return None
    return Fraction(r) ** p


def pow_enclosure(n, e, prec):
    """Rational endpoints (lo, hi) with lo <= n**e <= hi at ``prec`` bits."""
    e = _as_fraction(e)
    old = iv.prec
    iv.prec = prec
    try:
        x = iv.mpf(n) ** (iv.mpf(e.numerator) / iv.mpf(e.denominator))
        a, b = x._mpi_
    finally:
        iv.prec = old
    return Fraction(*to_rational(a)), Fraction(*to_rational(b))


def compare_pow(value, n, e):
    """Sign of ``value - n**e`` (-1, 0 or 1), decided exactly."""
    value = _as_fraction(value)
    exact = exact_pow(n, e)
    if exact is not None:
        return (value > exact) - (value < exact)
    prec = _START_PREC
    while prec <= _MAX_PREC:
        lo, hi = pow_enclosure(n, e, prec)
        if value < lo:
            return -1
        if value > hi:
            return 1
        prec *= 2
    raise ArithmeticError(f"could not separate {value} from {n}**{e}")


def floor_pow(n, e):
    """Exact ``floor(n ** e)`` for a positive integer n."""
    k = math.floor(n ** float(e))
    while compare_pow(k, n, e) > 0:
        k -= 1
    while compare_pow(k + 1, n, e) <= 0:
        k += 1
    return k


def ceil_pow(n, e):
    """Exact ``ceil(n ** e)`` for a positive integer n."""
    k = math.ceil(n ** float(e))
    while compare_pow(k, n, e) < 0:
        k += 1
    while compare_pow(k - 1, n, e) >= 0:
        k -= 1
    return k


def pow_upper(n, e):
    """A float that is certainly >= n**e."""
    exact = exact_pow(n, e)
    if exact is not None:
        x = float(exact)
        return x if Fraction(x) >= exact else math.nextafter(x, math.inf)
    _, hi = pow_enclosure(n, e, _START_PREC)
    x = float(hi)
    return x if Fraction(x) >= hi else math.nextafter(x, math.inf)


def round_up(value):
    """Smallest-ish float >= an exact rational value."""
    value = _as_fraction(value)
    x = float(value)
    return x if Fraction(x) >= value else math.nextafter(x, math.inf)
