"""Regularized incomplete beta function and the F-distribution tail."""

import math

CF_TOL = 1e-12
CF_MAX_ITER = 20000
_TINY = 1e-300


class ConvergenceError(ArithmeticError):
    """The continued fraction did not settle within the iteration cap."""


def _betacf(a, b, x):
    """Continued fraction for I_x(a, b) by the modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction failed to converge for a={a}, b={b}, x={x}")


def _front(a, b, x, xc):
    # x^a (1-x)^b / (a B(a, b)), in logs
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return math.exp(a * math.log(x) + b * math.log(xc) - log_beta) / a


def betainc_regularized(a, b, x, xc=None):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1.

    ``xc`` may carry 1 - x when the caller can form it without cancellation.
    For x beyond (a + 1) / (a + b + 2) the symmetry
    I_x(a, b) = 1 - I_{1-x}(b, a) is used so the fraction converges quickly.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if xc is None:
        xc = 1.0 - x
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if xc == 0.0:
        return 1.0
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - _front(b, a, xc, x) * _betacf(b, a, xc)
    return _front(a, b, x, xc) * _betacf(a, b, x)


def f_survival(f, d1, d2):
    """Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.

    Evaluated as I_y(d2/2, d1/2) with y = d2 / (d1 f + d2), which equals
    1 - I_x(d1/2, d2/2) at x = d1 f / (d1 f + d2) but keeps full relative
    precision when the tail is tiny.
    """
    if not (d1 >= 1 and d2 >= 1):
        raise ValueError(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    if math.isnan(f) or f < 0:
        raise ValueError(f"F statistic must be >= 0, got {f}")
    if f == 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    denom = d1 * f + d2
    p = betainc_regularized(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * f / denom)
    return min(max(p, 0.0), 1.0)
