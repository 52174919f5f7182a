"""Special functions used by the risk engine.

Everything here is scalar, pure and reentrant. Student-t tails have two
independent routes: the regularized incomplete beta (the reference) and a
Gauss hypergeometric closed form, which is cross-checked against it.
"""

from __future__ import annotations

import math

from scipy.special import zeta

from .errors import ConvergenceError, DomainError

SERIES_BUDGET = 10_000
CF_BUDGET = 500

_TINY = 1e-300
_CF_EPS = 2.5e-16
_SERIES_EPS = 1e-17
# cancellation factor above which a summation route is rejected
_GOOD_CONDITION = 1e3
_USABLE_CONDITION = 1e5
_LOG_PI = math.log(math.pi)
_EULER_GAMMA = 0.57721566490153286061
# (-1)^k (zeta(k) - 1) / k for the lnΓ series around x = 1 and x = 2
_LGAMMA_COEFFS = tuple((-1) ** k * float(zeta(k) - 1.0) / k for k in range(2, 60))
_NEAR_ROOT = 0.25


def log_gamma(x: float) -> float:
    """Return ln Γ(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    # lnΓ vanishes at 1 and 2, where math.lgamma keeps only absolute accuracy
    if abs(x - 1.0) < _NEAR_ROOT:
        z = x - 1.0
        return _lgamma_2_plus(z) - math.log1p(z)
    if abs(x - 2.0) < _NEAR_ROOT:
        return _lgamma_2_plus(x - 2.0)
    return math.lgamma(x)


def _lgamma_2_plus(z: float) -> float:
    """ln Γ(2 + z) = (1 - γ) z + Σ_k (-1)^k (ζ(k) - 1) z^k / k, |z| < 1."""
    total, power = 0.0, z
    for c in _LGAMMA_COEFFS:
        power *= z
        term = c * power
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return (1.0 - _EULER_GAMMA) * z + total


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def sphere_surface(n: int) -> float:
    """Surface area |S_{n-2}| of the unit sphere sitting in R^(n-1).

    ``n`` is the ambient dimension of the risk factors, so ``n=3`` gives the
    circumference of the unit circle.
    """
    if n < 2 or int(n) != n:
        raise DomainError(f"sphere_surface requires an integer n >= 2, got {n!r}")
    k = (n - 1) / 2.0
    return 2.0 * math.exp(k * _LOG_PI - math.lgamma(k))


# --------------------------------------------------------------------------
# Gauss hypergeometric 2F1 on z <= 0


def _series(a, b, c, x):
    """Sum the Gauss series at ``x``; returns (value, cancellation factor)."""
    total = 1.0
    term = 1.0
    peak = 1.0
    for k in range(SERIES_BUDGET):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x
        term *= ratio
        if term == 0.0:
            break
        total += term
        peak = max(peak, abs(term))
        rho = max(abs(ratio), abs(x))
        if rho < 1.0 and abs(term) * rho <= _SERIES_EPS * abs(total) * (1.0 - rho):
            break
    else:
        raise ConvergenceError(
            f"2F1 series ({a}, {b}; {c}; {x}) did not converge in {SERIES_BUDGET} terms")
    if total == 0.0:
        return 0.0, math.inf
    return total, peak / abs(total)


def _is_integer(v: float) -> bool:
    return abs(v - round(v)) < 1e-12


def _log_abs_gamma(x):
    """(log|Γ(x)|, sign of Γ(x)); x must not be a pole."""
    if x > 0:
        return math.lgamma(x), 1.0
    if _is_integer(x):
        raise DomainError(f"Gamma pole at {x}")
    return math.lgamma(x), (-1.0 if math.floor(x) % 2 else 1.0)


def _log_gamma_ratio(num, den):
    """log|∏Γ(num)/∏Γ(den)| and its sign; a pole in ``den`` yields sign 0."""
    log_val, sign = 0.0, 1.0
    for x in num:
        lv, s = _log_abs_gamma(x)
        log_val += lv
        sign *= s
    for x in den:
        if x <= 0 and _is_integer(x):
            return 0.0, 0.0
        lv, s = _log_abs_gamma(x)
        log_val -= lv
        sign *= s
    return log_val, sign


def _combine(parts):
    """Sum sign*exp(log) parts; returns (log|sum|, sign, cancellation factor).

    ``parts`` holds (log magnitude, sign, condition of that part).
    """
    parts = [p for p in parts if p[1] != 0.0]
    if not parts:
        return -math.inf, 0.0, 1.0
    top = max(p[0] for p in parts)
    total = sum(s * math.exp(lv - top) for lv, s, _ in parts)
    size = sum(math.exp(lv - top) * cond for lv, _, cond in parts)
    if total == 0.0:
        return -math.inf, 0.0, math.inf
    return top + math.log(abs(total)), math.copysign(1.0, total), size / abs(total)


def _direct(a, b, c, z):
    value, cond = _series(a, b, c, z)
    if value == 0.0:
        return -math.inf, 0.0, cond
    return math.log(abs(value)), math.copysign(1.0, value), cond


def _pfaff(a, b, c, z):
    # 2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; z/(z-1))
    w = z / (z - 1.0)
    value, cond = _series(a, c - b, c, w)
    if value == 0.0:
        return -math.inf, 0.0, cond
    return -a * math.log1p(-z) + math.log(abs(value)), math.copysign(1.0, value), cond


def _inversion(a, b, c, z):
    # connection formula between z and 1/z, valid for non-integer b - a
    lz = math.log(-z)
    parts = []
    for p, q in ((a, b), (b, a)):
        log_coef, sign = _log_gamma_ratio((c, q - p), (q, c - p))
        if sign == 0.0:
            continue
        value, cond = _series(p, p - c + 1.0, p - q + 1.0, 1.0 / z)
        if value == 0.0:
            continue
        parts.append((log_coef - p * lz + math.log(abs(value)),
                      sign * math.copysign(1.0, value), cond))
    return _combine(parts)


def _log_gauss_2f1(a, b, c, z):
    """Evaluate 2F1 as (log|F|, sign), choosing a well-conditioned route."""
    if z == 0.0:
        return 0.0, 1.0
    routes = []
    if z >= -0.5:
        routes.append(_direct)
    if z <= -2.0 and not _is_integer(b - a):
        routes.append(_inversion)
    routes.append(_pfaff)
    routes.append(lambda a_, b_, c_, z_: _pfaff(b_, a_, c_, z_))
    if -2.0 < z < -0.5 and not _is_integer(b - a):
        routes.append(_inversion)

    best = None
    failures = []
    for route in routes:
        try:
            log_val, sign, cond = route(a, b, c, z)
        except ConvergenceError as exc:
            failures.append(str(exc))
            continue
        if cond <= _GOOD_CONDITION:
            return log_val, sign
        if best is None or cond < best[2]:
            best = (log_val, sign, cond)
    if best is not None and best[2] <= _USABLE_CONDITION:
        return best[0], best[1]
    detail = f"best cancellation factor {best[2]:.3g}" if best else "; ".join(failures)
    raise ConvergenceError(f"2F1({a}, {b}; {c}; {z}) could not be evaluated: {detail}")


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 0.

    Small |z| uses the power series directly; elsewhere the Pfaff
    transformation z -> z/(z-1) or the 1/z connection formula is used,
    whichever sums with the least cancellation.
    """
    if not c > 0:
        raise DomainError(f"gauss_2f1 requires c > 0, got {c!r}")
    if z > 0:
        raise DomainError(f"gauss_2f1 is only implemented for z <= 0, got {z!r}")
    log_val, sign = _log_gauss_2f1(a, b, c, z)
    return sign * math.exp(log_val)


# --------------------------------------------------------------------------
# Regularized incomplete beta


def _beta_cf(a, b, x):
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_BUDGET + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction (a={a}, b={b}, x={x}) "
        f"did not converge in {CF_BUDGET} iterations")


def _ibeta(x, y, a, b):
    """I_x(a, b) where y = 1 - x is supplied separately to keep precision."""
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log(y) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, y) / b


def reg_incomplete_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError(f"reg_incomplete_beta requires a, b > 0, got a={a!r}, b={b!r}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"reg_incomplete_beta requires 0 <= x <= 1, got {x!r}")
    return _ibeta(x, 1.0 - x, a, b)


# --------------------------------------------------------------------------
# Univariate tails


def _check_student_args(s, nu):
    if not s > 0:
        raise DomainError(f"student tail requires s > 0, got {s!r}")
    if not nu > 0:
        raise DomainError(f"student tail requires nu > 0, got {nu!r}")


def student_tail_beta(s: float, nu: float) -> float:
    """P(T <= -s) for T ~ t(nu), via ½ I_{nu/(nu+s²)}(nu/2, ½)."""
    _check_student_args(s, nu)
    s2 = s * s
    return 0.5 * _ibeta(nu / (nu + s2), s2 / (nu + s2), 0.5 * nu, 0.5)


def student_tail_hypergeometric(s: float, nu: float) -> float:
    """P(T <= -s) for T ~ t(nu) from the closed form

    (1/(nu√π)) (nu/s²)^(nu/2) Γ((nu+1)/2)/Γ(nu/2) 2F1((1+nu)/2, nu/2; 1+nu/2; -nu/s²),

    evaluated in log space so that (nu/s²)^(nu/2) cannot overflow.
    """
    _check_student_args(s, nu)
    log_f, sign = _log_gauss_2f1(0.5 * (1.0 + nu), 0.5 * nu, 1.0 + 0.5 * nu, -nu / (s * s))
    log_pref = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - math.log(nu)
                - 0.5 * _LOG_PI + 0.5 * nu * (math.log(nu) - 2.0 * math.log(s)))
    return sign * math.exp(log_pref + log_f)


def student_tail(s: float, nu: float, route: str = "beta") -> float:
    """Lower tail P(T <= -s) of a standard Student-t with ``nu`` degrees of freedom.

    ``route`` selects "beta" (reference) or "hypergeometric".
    """
    if route == "beta":
        return student_tail_beta(s, nu)
    if route == "hypergeometric":
        return student_tail_hypergeometric(s, nu)
    raise ValueError(f"unknown student tail route {route!r}")


def normal_tail(s: float) -> float:
    """Φ(-s) for the standard normal."""
    return 0.5 * math.erfc(s / math.sqrt(2.0))
