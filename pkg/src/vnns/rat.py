"""Exact rational arithmetic helpers used throughout the toolkit.

All decision-relevant arithmetic is done on arbitrary-precision rationals.
gmpy2's mpq is used when available (it is considerably faster); the stdlib
Fraction is a drop-in fallback. Both types interoperate with ints and with
each other, so callers only ever go through `rat(...)` and the formatting
helpers below.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

try:
    from gmpy2 import mpq as _mpq

    def _make(n, d=1):
        return _mpq(n, d)

    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _make = Fraction
    HAVE_GMPY2 = False

Rat = Union[Fraction, "_mpq"] if HAVE_GMPY2 else Fraction

ZERO = _make(0)
ONE = _make(1)


def rat(value, denominator=None) -> Rat:
    """Build an exact rational from an int pair, int, float, or string.

    Floats are promoted exactly (every finite float is a dyadic rational).
    Strings accept integers ("3"), fractions ("3/4"), and decimal notation
    ("-0.25", "1e-3"), all parsed exactly.
    """
    if denominator is not None:
        return _make(value, denominator)
    if isinstance(value, int):
        return _make(value)
    if isinstance(value, float):
        return _make(Fraction(value))
    if isinstance(value, str):
        return _parse_str(value)
    return _make(value)


def _parse_str(s: str) -> Rat:
    s = s.strip()
    if "/" in s:
        num, _, den = s.partition("/")
        return _make(int(num), int(den))
    # Decimal / scientific notation, parsed exactly (no float round trip).
    mantissa, exp = s, 0
    for marker in ("e", "E"):
        if marker in mantissa:
            mantissa, _, expstr = mantissa.partition(marker)
            exp = int(expstr)
            break
    if "." in mantissa:
        intpart, _, fracpart = mantissa.partition(".")
        exp -= len(fracpart)
        mantissa = (intpart or "0") + fracpart
        if mantissa in ("", "-", "+"):
            raise ValueError(f"not a number: {s!r}")
    digits = int(mantissa)
    if exp >= 0:
        return _make(digits * 10**exp)
    return _make(digits, 10**-exp)


def rat_str(r: Rat) -> str:
    """Canonical "p/q" form: lowest terms, positive denominator, "p" if q=1."""
    n, d = r.numerator, r.denominator
    if d == 1:
        return str(n)
    return f"{n}/{d}"


def parse_rat_str(s: str) -> Rat:
    """Parse the canonical "p/q" form, rejecting non-canonical spellings."""
    s = s.strip()
    if "/" in s:
        num, _, den = s.partition("/")
        n, d = int(num), int(den)
        if d <= 1:
            raise ValueError(f"non-canonical rational {s!r}")
        r = _make(n, d)
        if r.numerator != n or r.denominator != d:
            raise ValueError(f"non-canonical rational {s!r}")
        return r
    return _make(int(s))


def decimal_str(r: Rat) -> str | None:
    """Exact finite decimal expansion, or None if one does not exist.

    A rational has a finite decimal expansion iff its reduced denominator
    is of the form 2^a * 5^b.
    """
    n, d = r.numerator, r.denominator
    a = 0
    while d % 2 == 0:
        d //= 2
        a += 1
    b = 0
    while d % 5 == 0:
        d //= 5
        b += 1
    if d != 1:
        return None
    k = max(a, b)
    scaled = n * 10**k // (r.denominator)
    if k == 0:
        return f"{scaled}.0"
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(k + 1, "0")
    intpart, fracpart = digits[:-k], digits[-k:]
    return f"{sign}{intpart}.{fracpart}"


def float_exact(r: Rat) -> bool:
    """True when float64(r) represents r exactly."""
    f = float(r)
    return Fraction(f) == r if f == f and abs(f) != float("inf") else False
