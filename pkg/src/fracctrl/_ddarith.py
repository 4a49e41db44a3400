"""Compensated double-double arithmetic (~31 significant digits).

Internal helper for the scalar Mittag-Leffler series, whose alternating terms
can exceed the final sum by many orders of magnitude.  A value is a
``(hi, lo)`` pair of floats with ``hi = fl(hi + lo)``.  Only positive real
gamma arguments are needed, so ``lgamma`` uses the Stirling series above a
fixed threshold with upward argument shifting below it.

This is fixed extended precision, not arbitrary precision: every operation is
a short, branch-light sequence of float operations (Dekker/Knuth error-free
transformations).
"""

from __future__ import annotations

import math

_SPLIT = 134217729.0  # 2**27 + 1, Dekker splitting constant

# ln 2 to double-double precision
_LN2 = (0.6931471805599453, 2.3190468138462996e-17)


def two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    return s, b - (s - a)


def _split(a: float) -> tuple[float, float]:
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def add(x, y):
    # accurate variant: error-free sums of both components
    s, e = two_sum(x[0], y[0])
    t, f = two_sum(x[1], y[1])
    e += t
    s, e = _quick_two_sum(s, e)
    e += f
    return _quick_two_sum(s, e)


def neg(x):
    return (-x[0], -x[1])


def mul(x, y):
    p, e = two_prod(x[0], y[0])
    e += x[0] * y[1] + x[1] * y[0]
    return _quick_two_sum(p, e)


def div(x, y):
    q1 = x[0] / y[0]
    r = add(x, neg(mul((q1, 0.0), y)))
    q2 = r[0] / y[0]
    r = add(r, neg(mul((q2, 0.0), y)))
    q3 = r[0] / y[0]
    s, e = _quick_two_sum(q1, q2)
    return add((s, e), (q3, 0.0))


def exp(x):
    """exp of a double-double; underflows to (0, 0) far below the double range."""
    if x[0] < -746.0:
        return (0.0, 0.0)
    if x[0] > 709.0:
        return (math.inf, 0.0)
    n = int(round(x[0] / _LN2[0]))
    r = add(x, neg(mul((float(n), 0.0), _LN2)))
    s = (1.0, 0.0)
    term = (1.0, 0.0)
    for k in range(1, 40):
        term = div(mul(term, r), (float(k), 0.0))
        s = add(s, term)
        if abs(term[0]) < 1e-35 * abs(s[0]):
            break
    return (math.ldexp(s[0], n), math.ldexp(s[1], n))


def log(x):
    """Natural log of a positive double-double, via one Newton refinement pass
    on top of the float seed (doubles the digits twice over)."""
    y = (math.log(x[0]), 0.0)
    for _ in range(2):
        y = add(y, add(mul(x, exp(neg(y))), (-1.0, 0.0)))
    return y


# Stirling correction coefficients B_{2j} / (2j (2j-1)) from exact Bernoulli
# fractions; valid to ~1e-33 relative for arguments >= 26.
_BERNOULLI = [
    (1, 6), (-1, 30), (1, 42), (-1, 30), (5, 66), (-691, 2730), (7, 6),
    (-3617, 510), (43867, 798), (-174611, 330), (854513, 138),
    (-236364091, 2730), (8553103, 6),
]
_STIRLING = [
    div((float(num), 0.0), (float(den) * (2 * j + 2) * (2 * j + 1), 0.0))
    for j, (num, den) in enumerate(_BERNOULLI)
]
_HALF_LN_2PI = mul((0.5, 0.0), log((6.283185307179586, 2.4492935982947064e-16)))
_STIRLING_MIN = 26.0


def lgamma(x):
    """log Gamma of a positive double-double argument."""
    shift = (1.0, 0.0)
    while x[0] < _STIRLING_MIN:
        shift = mul(shift, x)
        x = add(x, (1.0, 0.0))
    lx = log(x)
    res = add(mul(add(x, (-0.5, 0.0)), lx), neg(x))
    res = add(res, _HALF_LN_2PI)
    x2 = mul(x, x)
    xp = x
    for c in _STIRLING:
        t = div(c, xp)
        res = add(res, t)
        if abs(t[0]) < 1e-35:
            break
        xp = mul(xp, x2)
    if shift != (1.0, 0.0):
        res = add(res, neg(log(shift)))
    return res


def rgamma(x):
    """1 / Gamma(x) for positive double-double x; underflows cleanly to 0."""
    return exp(neg(lgamma(x)))


def to_float(x) -> float:
    return x[0] + x[1]
