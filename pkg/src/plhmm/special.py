"""Digamma, trigamma, their inversion, and the regularized incomplete gamma.

Scalar routines written against :mod:`math`; the log-domain helpers are what
the Gamma duration model uses to keep far-tail probabilities finite.
"""
import math

from .errors import DomainError, NumericError

EULER_GAMMA = 0.57721566490153286061

# B_{2k} / (2k) for the digamma asymptotic series, k = 1..7
_PSI_COEF = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
# B_{2k} for the trigamma asymptotic series, k = 1..7
_PSI1_COEF = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)

_ASYMPTOTIC_FROM = 10.0
_TINY = 1e-300
_EPS = 2.220446049250313e-16


def _check_positive(x, name="x"):
    if not (x > 0) or not math.isfinite(x):
        raise DomainError(f"{name} must be positive and finite, got {x!r}")


def digamma(x):
    """Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.

    Shifts x above 10 with psi(x) = psi(x + 1) - 1/x, then sums the
    asymptotic expansion through the x**-14 term.
    """
    _check_positive(x)
    shift = 0.0
    while x < _ASYMPTOTIC_FROM:
        shift += 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    poly = 0.0
    for c in reversed(_PSI_COEF):
        poly = poly * inv2 + c
    return math.log(x) - 0.5 / x - poly * inv2 - shift


def trigamma(x):
    """Trigamma function psi'(x) for x > 0."""
    _check_positive(x)
    shift = 0.0
    while x < _ASYMPTOTIC_FROM:
        shift += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    poly = 0.0
    for c in reversed(_PSI1_COEF):
        poly = poly * inv2 + c
    return inv + 0.5 * inv2 + poly * inv2 * inv + shift


def invert_digamma(x, max_iter=50):
    """Solve psi(nu) = x for nu > 0 by Newton-Raphson.

    Parameters
    ----------
    x : float
        Target digamma value.
    max_iter : int
        Newton iterations allowed before giving up.

    Returns
    -------
    float
        nu with psi(nu) = x to within floating-point resolution.

    Raises
    ------
    NumericError
        If the iteration has not converged after ``max_iter`` steps; the
        last iterate is attached as ``err.last``.
    """
    if not math.isfinite(x):
        raise DomainError(f"invert_digamma needs a finite argument, got {x!r}")
    if x >= -2.22:
        y = math.exp(x) + 0.5
    else:
        y = -1.0 / (x - digamma(1.0))
    tol = 1e-14 * max(1.0, abs(x))
    for _ in range(max_iter):
        r = digamma(y) - x
        if abs(r) <= tol:
            return y
        y_new = y - r / trigamma(y)
        if y_new <= 0.0:
            y_new = 0.5 * y
        if abs(y_new - y) <= 4 * _EPS * y_new:
            return y_new
        y = y_new
    raise NumericError(f"invert_digamma({x!r}) did not converge in {max_iter} iterations", last=y)


_MAX_TERMS = 200_000
_LOG_2PI = math.log(2.0 * math.pi)


def _log1pmx(t):
    """ln(1 + t) - t for |t| <= 0.25 without cancellation near t = 0."""
    # alternating series -t^2/2 + t^3/3 - ...
    total = 0.0
    power = -t
    for k in range(2, 200):
        power *= -t
        term = power / k
        total -= term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


def _stirling_tail(s):
    # lgamma(s) - [(s - 1/2) ln s - s + ln(2 pi)/2] for s >= 10
    r = 1.0 / (s * s)
    return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / s


def _log_prefactor(s, x):
    """s ln x - x - lgamma(s), computed around x = s to avoid cancellation."""
    if s < 10.0:
        return s * math.log(x) - x - math.lgamma(s)
    lam = x / s
    if abs(lam - 1.0) > 0.25:
        core = math.log(lam) - lam + 1.0
    else:
        core = _log1pmx((x - s) / s)
    return s * core + 0.5 * (math.log(s) - _LOG_2PI) - _stirling_tail(s)


def _log_p_series(s, x):
    # ln P(s, x) from the power series; valid (and used) for x < s + 1.
    # Terms decay like exp(-k^2 / 2s) near x = s, so O(sqrt(s)) are needed.
    term = 1.0
    total = 1.0
    a = s
    for _ in range(_MAX_TERMS):
        a += 1.0
        term *= x / a
        total += term
        if term < total * 1e-17:
            break
    else:
        raise NumericError(f"incomplete gamma series did not converge for s={s!r}, x={x!r}")
    return _log_prefactor(s, x) - math.log(s) + math.log(total)


def _log_q_fraction(s, x):
    # ln Q(s, x) from the modified-Lentz continued fraction; used for x >= s + 1
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise NumericError(f"incomplete gamma fraction did not converge for s={s!r}, x={x!r}")
    return _log_prefactor(s, x) + math.log(h)


def _log1mexp(a):
    """ln(1 - exp(a)) for a <= 0."""
    if a == -math.inf:
        return 0.0
    if a > -0.6931471805599453:
        return math.log(-math.expm1(a))
    return math.log1p(-math.exp(a))


def log_reg_gamma_pq(s, x):
    """Return ``(ln P(s, x), ln Q(s, x))`` with Q = 1 - P."""
    _check_positive(s, "s")
    if x == 0:
        return -math.inf, 0.0
    if x == math.inf:
        return 0.0, -math.inf
    if not (x > 0) or math.isnan(x):
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x < s + 1.0:
        lp = _log_p_series(s, x)
        return lp, _log1mexp(min(lp, 0.0))
    lq = _log_q_fraction(s, x)
    return _log1mexp(min(lq, 0.0)), lq


def reg_lower_incomplete_gamma(s, x):
    """Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s)."""
    _check_positive(s, "s")
    if not (x >= 0) or math.isnan(x):
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0:
        return 0.0
    if x < s + 1.0:
        return min(1.0, math.exp(_log_p_series(s, x)))
    if x == math.inf:
        return 1.0
    return max(0.0, -math.expm1(_log_q_fraction(s, x)))


def log_gamma_interval(s, a, b):
    """ln(P(s, b) - P(s, a)) for 0 <= a <= b <= inf, accurate in both tails."""
    if b < a:
        raise DomainError("interval bounds out of order")
    if a == b:
        return -math.inf
    lpa, lqa = log_reg_gamma_pq(s, a)
    lpb, lqb = log_reg_gamma_pq(s, b)
    return _interval_from_logs(s, a, b, lpa, lqa, lpb, lqb)


def _interval_from_logs(s, a, b, lpa, lqa, lpb, lqb):
    if b <= s + 1.0:
        if lpb == -math.inf:
            return -math.inf
        return lpb + _log1mexp(min(lpa - lpb, 0.0))
    if a >= s + 1.0:
        if lqa == -math.inf:
            return -math.inf
        return lqa + _log1mexp(min(lqb - lqa, 0.0))
    mass = 1.0 - math.exp(lqb) - math.exp(lpa)
    return math.log(mass) if mass > 0 else -math.inf


def log_gamma_interval_grid(s, points):
    """ln of the mass between each pair of consecutive, increasing ``points``."""
    logs = [log_reg_gamma_pq(s, x) for x in points]
    out = []
    for k in range(len(points) - 1):
        lpa, lqa = logs[k]
        lpb, lqb = logs[k + 1]
        out.append(_interval_from_logs(s, points[k], points[k + 1], lpa, lqa, lpb, lqb))
    return out
