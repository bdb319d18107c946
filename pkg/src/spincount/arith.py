"""Number handling shared by all modules.

Exact values are gmpy2 ``mpq`` rationals; inexact values are Python floats.
"""
import math
from fractions import Fraction

import gmpy2
from gmpy2 import mpq

EXACT_TYPES = (int, Fraction, type(mpq(0)))


def is_exact(x) -> bool:
    return isinstance(x, EXACT_TYPES) and not isinstance(x, bool)


def parse_number(text: str):
    """Parse "p/q", an integer or a decimal literal into an exact rational."""
    s = str(text).strip()
    if not s:
        raise ValueError("empty number")
    try:
        if "/" in s:
            p, d = s.split("/")
            num, den = int(p), int(d)
            if den == 0:
                raise ValueError("zero denominator")
            return mpq(num, den)
        if any(ch in s for ch in ".eE"):
            if s.lower() in ("nan", "inf", "-inf", "+inf", "infinity"):
                raise ValueError(s)
            return mpq(Fraction(s))
        return mpq(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def to_exact(x):
    if isinstance(x, str):
        return parse_number(x)
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("non-finite value")
        return mpq(x)
    return mpq(x)


def convert(x, exact: bool):
    return to_exact(x) if exact else float(x)


def format_number(x) -> str:
    """Exact values as "p/q" (or "p"), floats via repr."""
    if isinstance(x, float):
        return repr(x)
    x = mpq(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def exact_sqrt(x, bits: int = 256):
    """Square root of a nonnegative rational.

    Perfect squares are returned exactly, anything else is rounded to a
    rational with about ``bits`` bits of relative precision, deterministically.
    """
    if isinstance(x, float):
        return math.sqrt(x)
    x = mpq(x)
    if x < 0:
        raise ValueError("negative square root")
    n, d = x.numerator, x.denominator
    rn, rd = gmpy2.isqrt(n), gmpy2.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return mpq(rn, rd)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        root = gmpy2.sqrt(gmpy2.mpfr(n) / gmpy2.mpfr(d))
        return mpq(root)


def harmonic(k: int):
    """H(k) = 1 + 1/2 + ... + 1/k, exact, with H(0) = 0."""
    if k < 0:
        raise ValueError("harmonic number of a negative integer")
    total = mpq(0)
    for i in range(1, k + 1):
        total += mpq(1, i)
    return total


def harmonic_upper(m: int):
    """An upper bound on H(m): exact when m is small, ln m + 1 otherwise."""
    if m <= 100000:
        return harmonic(m)
    return math.log(m) * (1 + 1e-12) + 1
