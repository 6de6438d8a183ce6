"""Numba kernel backend.

Scalar implementations of every marginal/copula primitive compiled with
``@njit``, plus flat loops that drive them over arrays.  This path is
self-contained: the normal CDF/quantile and the regularized incomplete
gamma are implemented here rather than taken from scipy, so the compiled
code has no Python-level calls.

The algebra mirrors ``numpy_impl`` exactly; the test suite checks the two
backends against each other on dense grids.
"""

import math

import numpy as np
from numba import njit

from .codes import (
    COP_CLAYTON90,
    COP_CLAYTON180,
    COP_CLAYTON270,
    COP_FRANK,
    COP_GAUSSIAN,
    COP_GUMBEL,
    COP_INDEPENDENCE,
    COP_JOE,
    DENSITY_FLOOR,
    FRANK_INDEP_TOL,
    MARG_GAMMA,
    MARG_LOGLOGISTIC,
    MARG_LOGNORMAL,
    MARG_WEIBULL,
    UV_EPS,
)

NAME = "numba"

LOG_FLOOR = math.log(DENSITY_FLOOR)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ndtr(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def _ndtri_half(p):
    # p in (0, 0.5]; Acklam's rational approximation + two Halley polishes.
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (
            ((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
               - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
             + 4.374664141464968e+00) * q + 2.938163982698783e+00
        ) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (
            (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q
        ) / (
            ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
               - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
             - 1.328068155288572e+01) * r + 1.0
        )
    for _ in range(2):
        e = _ndtr(x) - p
        u = e * _SQRT_2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


@njit(cache=True)
def _ndtri(p):
    # upper half via symmetry; 1 - p is exact for p >= 0.5
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    if p > 0.5:
        return -_ndtri_half(1.0 - p)
    return _ndtri_half(p)


@njit(cache=True)
def _gammainc_p(a, x):
    # regularized lower incomplete gamma: series for x < a+1, else
    # continued fraction (modified Lentz) for the upper tail.
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        ap = a
        s = 1.0 / a
        d = s
        for _ in range(500):
            ap += 1.0
            d *= x / ap
            s += d
            if abs(d) < abs(s) * 1e-16:
                break
        return s * math.exp(-x + a * math.log(x) - math.lgamma(a))
    b = x + 1.0 - a
    c = 1.0 / 1e-300
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < 1e-300:
            d = 1e-300
        c = b + an / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    q = math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    return 1.0 - q


@njit(cache=True)
def _log1mexp(a):
    # log(1 - e^a) for a <= 0
    if a < -math.log(2.0):
        return math.log1p(-math.exp(a))
    return math.log(-math.expm1(min(a, 0.0)))


# ---------------------------------------------------------------------------
# marginal families (a, b follow the public parameter order per family)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _marg_ucdf(fam, a, b, t):
    if t <= 0.0:
        return 0.0
    if fam == MARG_WEIBULL:
        return -math.expm1(-((t / a) ** b))
    if fam == MARG_LOGNORMAL:
        return _ndtr((math.log(t) - b) / a)
    if fam == MARG_LOGLOGISTIC:
        r = (t / a) ** b
        return r / (1.0 + r)
    # gamma
    p = _gammainc_p(a, t / b)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


@njit(cache=True)
def _marg_ulogpdf(fam, a, b, t):
    if t < 0.0:
        return -math.inf
    if fam == MARG_WEIBULL:
        if t == 0.0:
            if b < 1.0:
                return math.inf
            if b == 1.0:
                return math.log(b) - b * math.log(a)
            return -math.inf
        return math.log(b) - b * math.log(a) + (b - 1.0) * math.log(t) - (t / a) ** b
    if fam == MARG_LOGNORMAL:
        if t == 0.0:
            return -math.inf
        z = (math.log(t) - b) / a
        return -math.log(t) - math.log(a) - 0.5 * _LOG_2PI - 0.5 * z * z
    if fam == MARG_LOGLOGISTIC:
        if t == 0.0:
            if b < 1.0:
                return math.inf
            if b == 1.0:
                return -math.log(a)
            return -math.inf
        return (
            math.log(b)
            - math.log(a)
            + (b - 1.0) * (math.log(t) - math.log(a))
            - 2.0 * math.log1p((t / a) ** b)
        )
    # gamma
    if t == 0.0:
        if a < 1.0:
            return math.inf
        if a == 1.0:
            return -math.log(b)
        return -math.inf
    return (a - 1.0) * math.log(t) - t / b - math.lgamma(a) - a * math.log(b)


@njit(cache=True)
def _gamma_ppf_std(a, q):
    # solve P(a, z) = q by safeguarded Newton; tolerance 1e-12 in probability
    if q <= 0.0:
        return 0.0
    g = _ndtri(q)
    t = 1.0 - 1.0 / (9.0 * a) + g / (3.0 * math.sqrt(a))
    z = a * t * t * t
    if z <= 0.0 or not math.isfinite(z):
        z = 1e-8
    lo = 0.0
    hi = z
    while _gammainc_p(a, hi) < q:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            break
    if z <= lo or z >= hi:
        z = 0.5 * (lo + hi)
    for _ in range(200):
        f = _gammainc_p(a, z) - q
        if abs(f) < 1e-12:
            break
        if f > 0.0:
            hi = z
        else:
            lo = z
        d = math.exp((a - 1.0) * math.log(z) - z - math.lgamma(a)) if z > 0.0 else 0.0
        if d > 0.0:
            zn = z - f / d
        else:
            zn = 0.5 * (lo + hi)
        if zn <= lo or zn >= hi or not math.isfinite(zn):
            zn = 0.5 * (lo + hi)
        z = zn
    return z


@njit(cache=True)
def _marg_uppf(fam, a, b, q):
    if fam == MARG_WEIBULL:
        return a * (-math.log1p(-q)) ** (1.0 / b)
    if fam == MARG_LOGNORMAL:
        return math.exp(b + a * _ndtri(q))
    if fam == MARG_LOGLOGISTIC:
        return a * (q / (1.0 - q)) ** (1.0 / b)
    return b * _gamma_ppf_std(a, q)


@njit(cache=True)
def _marg_cdf_s(fam, a, b, tau, t):
    F = _marg_ucdf(fam, a, b, t)
    if math.isfinite(tau):
        if t >= tau:
            return 1.0
        return min(F / _marg_ucdf(fam, a, b, tau), 1.0)
    return F


@njit(cache=True)
def _marg_pdf_s(fam, a, b, tau, t):
    f = math.exp(_marg_ulogpdf(fam, a, b, t))
    if math.isfinite(tau):
        if t > tau:
            return 0.0
        return f / _marg_ucdf(fam, a, b, tau)
    return f


@njit(cache=True)
def _marg_logpdf_s(fam, a, b, tau, t):
    lf = _marg_ulogpdf(fam, a, b, t)
    if math.isfinite(tau):
        if t > tau:
            return -math.inf
        return lf - math.log(_marg_ucdf(fam, a, b, tau))
    return lf


@njit(cache=True)
def _marg_ppf_s(fam, a, b, tau, q):
    if math.isfinite(tau):
        t = _marg_uppf(fam, a, b, q * _marg_ucdf(fam, a, b, tau))
        return min(t, tau)
    return _marg_uppf(fam, a, b, q)


# ---------------------------------------------------------------------------
# copula scalar primitives
# ---------------------------------------------------------------------------

@njit(cache=True)
def _clamp(x):
    if x < UV_EPS:
        return UV_EPS
    if x > 1.0 - UV_EPS:
        return 1.0 - UV_EPS
    return x


@njit(cache=True)
def _clayton_logs(theta, u, v):
    # log(u^-theta + v^-theta - 1); the small-exponent branch must be
    # relative-accurate because h raises S to -(theta+1)/theta, which
    # amplifies absolute log-S error by 1/theta.
    x = -theta * math.log(u)
    y = -theta * math.log(v)
    m = x if x > y else y
    if m < 500.0:
        return math.log1p(math.expm1(x) + math.expm1(y))
    return m + math.log(math.exp(x - m) + math.exp(y - m) - math.exp(-m))


@njit(cache=True)
def _clayton_cdf(theta, u, v):
    return math.exp(-_clayton_logs(theta, u, v) / theta)


@njit(cache=True)
def _clayton_h_tc(theta, u, v):
    logs = _clayton_logs(theta, u, v)
    return math.exp(-(theta + 1.0) * math.log(v) - (theta + 1.0) / theta * logs)


@njit(cache=True)
def _clayton_logpdf(theta, u, v):
    logs = _clayton_logs(theta, u, v)
    return (
        math.log1p(theta)
        - (theta + 1.0) * (math.log(u) + math.log(v))
        - (2.0 * theta + 1.0) / theta * logs
    )


@njit(cache=True)
def _clayton_hinv_ct(theta, w, u):
    term = math.expm1(-theta / (theta + 1.0) * math.log(w))
    z = term * math.exp(-theta * math.log(u))
    return math.exp(-math.log1p(z) / theta)


@njit(cache=True)
def _frank_cdf(theta, u, v):
    if theta < 0.0:
        return (
            -math.log1p(math.expm1(-theta * u) * math.expm1(-theta * v) / math.expm1(-theta))
            / theta
        )
    m = -theta * min(u, v)
    inner = (
        math.exp(-theta * u - m)
        + math.exp(-theta * v - m)
        - math.exp(-theta * (u + v) - m)
        - math.exp(-theta - m)
    )
    return -(m + math.log(inner) - math.log(-math.expm1(-theta))) / theta


@njit(cache=True)
def _frank_h_tc(theta, u, v):
    ratio = math.exp(theta * v) * math.expm1(-theta * (1.0 - u)) / (-math.expm1(theta * u))
    return 1.0 / (1.0 + ratio)


@njit(cache=True)
def _frank_logpdf(theta, u, v):
    if theta < 0.0:
        return _frank_logpdf(-theta, 1.0 - u, v)
    denom = -math.expm1(-theta) - math.expm1(-theta * u) * math.expm1(-theta * v)
    return (
        math.log(theta)
        + math.log(-math.expm1(-theta))
        - theta * (u + v)
        - 2.0 * math.log(denom)
    )


@njit(cache=True)
def _frank_hinv_ct(theta, w, u):
    a1w = math.exp(-theta * u) * (1.0 - w)
    return -(math.log(a1w + w * math.exp(-theta)) - math.log(w + a1w)) / theta


@njit(cache=True)
def _gumbel_logs(theta, u, v):
    x = theta * math.log(-math.log(u))
    y = theta * math.log(-math.log(v))
    m = x if x > y else y
    return m + math.log1p(math.exp(min(x, y) - m))


@njit(cache=True)
def _gumbel_cdf(theta, u, v):
    return math.exp(-math.exp(_gumbel_logs(theta, u, v) / theta))


@njit(cache=True)
def _gumbel_h_tc(theta, u, v):
    logs = _gumbel_logs(theta, u, v)
    A = math.exp(logs / theta)
    return math.exp(
        -A
        + (theta - 1.0) * math.log(-math.log(v))
        - math.log(v)
        - (theta - 1.0) / theta * logs
    )


@njit(cache=True)
def _gumbel_logpdf(theta, u, v):
    logs = _gumbel_logs(theta, u, v)
    A = math.exp(logs / theta)
    return (
        -A
        + (theta - 1.0) * (math.log(-math.log(u)) + math.log(-math.log(v)))
        - math.log(u)
        - math.log(v)
        + (2.0 / theta - 2.0) * logs
        + math.log1p((theta - 1.0) / A)
    )


@njit(cache=True)
def _joe_logs(theta, u, v):
    a = theta * math.log1p(-u)
    b = theta * math.log1p(-v)
    m = a if a > b else b
    return m + math.log(math.exp(a - m) + math.exp(b - m) - math.exp(a + b - m))


@njit(cache=True)
def _joe_cdf(theta, u, v):
    return -math.expm1(_joe_logs(theta, u, v) / theta)


@njit(cache=True)
def _joe_h_tc(theta, u, v):
    logs = _joe_logs(theta, u, v)
    a = theta * math.log1p(-u)
    return math.exp(
        (1.0 / theta - 1.0) * logs + _log1mexp(a) + (theta - 1.0) * math.log1p(-v)
    )


@njit(cache=True)
def _joe_logpdf(theta, u, v):
    logs = _joe_logs(theta, u, v)
    S = math.exp(logs)
    return (
        (1.0 / theta - 2.0) * logs
        + (theta - 1.0) * (math.log1p(-u) + math.log1p(-v))
        + math.log(theta - 1.0 + S)
    )


@njit(cache=True)
def _gauss_cdf(theta, u, v):
    x = _ndtri(u)
    y = _ndtri(v)
    acc = 0.0
    for i in range(_GL_X.shape[0]):
        r = 0.5 * theta * (_GL_X[i] + 1.0)
        s2 = 1.0 - r * r
        acc += (
            0.5
            * theta
            * _GL_W[i]
            * math.exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * s2))
            / (2.0 * math.pi * math.sqrt(s2))
        )
    return u * v + acc


@njit(cache=True)
def _gauss_h_tc(theta, u, v):
    s = math.sqrt(1.0 - theta * theta)
    return _ndtr((_ndtri(u) - theta * _ndtri(v)) / s)


@njit(cache=True)
def _gauss_logpdf(theta, u, v):
    x = _ndtri(u)
    y = _ndtri(v)
    s2 = 1.0 - theta * theta
    return -0.5 * math.log(s2) + (
        2.0 * theta * x * y - theta * theta * (x * x + y * y)
    ) / (2.0 * s2)


@njit(cache=True)
def _gauss_hinv_ct(theta, w, u):
    s = math.sqrt(1.0 - theta * theta)
    return _ndtr(theta * _ndtri(u) + s * _ndtri(w))


@njit(cache=True)
def _is_indep(fam, theta):
    if fam == COP_INDEPENDENCE:
        return True
    if fam == COP_FRANK and abs(theta) < FRANK_INDEP_TOL:
        return True
    if (fam == COP_GUMBEL or fam == COP_JOE) and theta == 1.0:
        return True
    if (
        fam == COP_CLAYTON90 or fam == COP_CLAYTON180 or fam == COP_CLAYTON270
    ) and theta < 1e-12:
        return True
    if fam == COP_GAUSSIAN and theta == 0.0:
        return True
    return False


@njit(cache=True)
def _cop_cdf(fam, theta, u, v):
    u = _clamp(u)
    v = _clamp(v)
    if _is_indep(fam, theta):
        return u * v
    if fam == COP_FRANK:
        return _frank_cdf(theta, u, v)
    if fam == COP_GUMBEL:
        return _gumbel_cdf(theta, u, v)
    if fam == COP_JOE:
        return _joe_cdf(theta, u, v)
    if fam == COP_CLAYTON90:
        return v - _clayton_cdf(theta, 1.0 - u, v)
    if fam == COP_CLAYTON180:
        return u + v - 1.0 + _clayton_cdf(theta, 1.0 - u, 1.0 - v)
    if fam == COP_CLAYTON270:
        return u - _clayton_cdf(theta, u, 1.0 - v)
    return _gauss_cdf(theta, u, v)


@njit(cache=True)
def _cop_h_tc(fam, theta, u, v):
    u = _clamp(u)
    v = _clamp(v)
    if _is_indep(fam, theta):
        return u
    if fam == COP_FRANK:
        return _frank_h_tc(theta, u, v)
    if fam == COP_GUMBEL:
        return _gumbel_h_tc(theta, u, v)
    if fam == COP_JOE:
        return _joe_h_tc(theta, u, v)
    if fam == COP_CLAYTON90:
        return 1.0 - _clayton_h_tc(theta, 1.0 - u, v)
    if fam == COP_CLAYTON180:
        return 1.0 - _clayton_h_tc(theta, 1.0 - u, 1.0 - v)
    if fam == COP_CLAYTON270:
        return _clayton_h_tc(theta, u, 1.0 - v)
    return _gauss_h_tc(theta, u, v)


@njit(cache=True)
def _cop_h_ct(fam, theta, v, u):
    u = _clamp(u)
    v = _clamp(v)
    if _is_indep(fam, theta):
        return v
    if fam == COP_FRANK:
        return _frank_h_tc(theta, v, u)
    if fam == COP_GUMBEL:
        return _gumbel_h_tc(theta, v, u)
    if fam == COP_JOE:
        return _joe_h_tc(theta, v, u)
    if fam == COP_CLAYTON90:
        return _clayton_h_tc(theta, v, 1.0 - u)
    if fam == COP_CLAYTON180:
        return 1.0 - _clayton_h_tc(theta, 1.0 - v, 1.0 - u)
    if fam == COP_CLAYTON270:
        return 1.0 - _clayton_h_tc(theta, 1.0 - v, u)
    return _gauss_h_tc(theta, v, u)


@njit(cache=True)
def _cop_logpdf(fam, theta, u, v):
    u = _clamp(u)
    v = _clamp(v)
    if _is_indep(fam, theta):
        return 0.0
    if fam == COP_FRANK:
        return _frank_logpdf(theta, u, v)
    if fam == COP_GUMBEL:
        return _gumbel_logpdf(theta, u, v)
    if fam == COP_JOE:
        return _joe_logpdf(theta, u, v)
    if fam == COP_CLAYTON90:
        return _clayton_logpdf(theta, 1.0 - u, v)
    if fam == COP_CLAYTON180:
        return _clayton_logpdf(theta, 1.0 - u, 1.0 - v)
    if fam == COP_CLAYTON270:
        return _clayton_logpdf(theta, u, 1.0 - v)
    return _gauss_logpdf(theta, u, v)


@njit(cache=True)
def _cop_hinv_ct(fam, theta, w, u):
    w = _clamp(w)
    u = _clamp(u)
    if _is_indep(fam, theta):
        return w
    if fam == COP_FRANK:
        out = _frank_hinv_ct(theta, w, u)
    elif fam == COP_CLAYTON90:
        out = _clayton_hinv_ct(theta, w, 1.0 - u)
    elif fam == COP_CLAYTON180:
        out = 1.0 - _clayton_hinv_ct(theta, 1.0 - w, 1.0 - u)
    elif fam == COP_CLAYTON270:
        out = 1.0 - _clayton_hinv_ct(theta, 1.0 - w, u)
    elif fam == COP_GAUSSIAN:
        out = _gauss_hinv_ct(theta, w, u)
    else:
        # Gumbel / Joe: monotone bisection, 200-iteration cap
        lo = UV_EPS
        hi = 1.0 - UV_EPS
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _cop_h_ct(fam, theta, mid, u) < w:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12:
                break
        out = 0.5 * (lo + hi)
    return _clamp(out)


# ---------------------------------------------------------------------------
# array drivers
# ---------------------------------------------------------------------------

@njit(cache=True)
def _marg_cdf_arr(fam, a, b, tau, t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = _marg_cdf_s(fam, a, b, tau, t[i])
    return out


@njit(cache=True)
def _marg_pdf_arr(fam, a, b, tau, t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = _marg_pdf_s(fam, a, b, tau, t[i])
    return out


@njit(cache=True)
def _marg_logpdf_arr(fam, a, b, tau, t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = _marg_logpdf_s(fam, a, b, tau, t[i])
    return out


@njit(cache=True)
def _marg_ppf_arr(fam, a, b, tau, q):
    out = np.empty(q.shape[0])
    for i in range(q.shape[0]):
        out[i] = _marg_ppf_s(fam, a, b, tau, q[i])
    return out


@njit(cache=True)
def _cop_cdf_arr(fam, theta, u, v):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _cop_cdf(fam, theta, u[i], v[i])
    return out


@njit(cache=True)
def _cop_h_tc_arr(fam, theta, u, v):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _cop_h_tc(fam, theta, u[i], v[i])
    return out


@njit(cache=True)
def _cop_h_ct_arr(fam, theta, v, u):
    out = np.empty(v.shape[0])
    for i in range(v.shape[0]):
        out[i] = _cop_h_ct(fam, theta, v[i], u[i])
    return out


@njit(cache=True)
def _cop_logpdf_arr(fam, theta, u, v):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _cop_logpdf(fam, theta, u[i], v[i])
    return out


@njit(cache=True)
def _cop_hinv_ct_arr(fam, theta, w, u):
    out = np.empty(w.shape[0])
    for i in range(w.shape[0]):
        out[i] = _cop_hinv_ct(fam, theta, w[i], u[i])
    return out


@njit(cache=True)
def _loglik_terms_arr(cop, theta, lfam, la, lb, ltau, cfam, ca, cb, p, y, delta):
    n = y.shape[0]
    terms = np.empty(n)
    truncated = math.isfinite(ltau)
    Ftau = _marg_ucdf(lfam, la, lb, ltau) if truncated else 1.0
    log_Ftau = math.log(Ftau) if truncated else 0.0
    logp = math.log(p)
    n_floored = 0
    for i in range(n):
        yi = y[i]
        Fu = _marg_ucdf(lfam, la, lb, yi)
        if truncated:
            Fu = 1.0 if yi >= ltau else min(Fu / Ftau, 1.0)
        Fc = _marg_ucdf(cfam, ca, cb, yi)
        u = _clamp(p * Fu)
        v = _clamp(Fc)
        if delta[i] == 1:
            lf = _marg_ulogpdf(lfam, la, lb, yi)
            if truncated:
                lf = -math.inf if yi > ltau else lf - log_Ftau
            br = 1.0 - _cop_h_ct(cop, theta, v, u)
            t = logp + lf + (math.log(br) if br > 0.0 else -math.inf)
        else:
            lf = _marg_ulogpdf(cfam, ca, cb, yi)
            br = 1.0 - _cop_h_tc(cop, theta, u, v)
            t = lf + (math.log(br) if br > 0.0 else -math.inf)
        if math.isnan(t) or t < LOG_FLOOR or t == math.inf:
            terms[i] = LOG_FLOOR
            n_floored += 1
        else:
            terms[i] = t
    return terms, n_floored


# ---------------------------------------------------------------------------
# public wrappers (match the numpy_impl signatures; accept any array shape)
# ---------------------------------------------------------------------------

def _flat(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, np.ascontiguousarray(arr).ravel()


def marg_cdf(fam, a, b, tau, t):
    arr, flat = _flat(t)
    return _marg_cdf_arr(fam, a, b, tau, flat).reshape(arr.shape)


def marg_pdf(fam, a, b, tau, t):
    arr, flat = _flat(t)
    return _marg_pdf_arr(fam, a, b, tau, flat).reshape(arr.shape)


def marg_logpdf(fam, a, b, tau, t):
    arr, flat = _flat(t)
    return _marg_logpdf_arr(fam, a, b, tau, flat).reshape(arr.shape)


def marg_ppf(fam, a, b, tau, q):
    arr, flat = _flat(q)
    return _marg_ppf_arr(fam, a, b, tau, flat).reshape(arr.shape)


def _pair(x, y):
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    xa, ya = np.broadcast_arrays(xa, ya)
    shape = xa.shape
    return shape, np.ascontiguousarray(xa).ravel(), np.ascontiguousarray(ya).ravel()


def cop_cdf(fam, theta, u, v):
    shape, uf, vf = _pair(u, v)
    return _cop_cdf_arr(fam, theta, uf, vf).reshape(shape)


def cop_h_tc(fam, theta, u, v):
    shape, uf, vf = _pair(u, v)
    return _cop_h_tc_arr(fam, theta, uf, vf).reshape(shape)


def cop_h_ct(fam, theta, v, u):
    shape, vf, uf = _pair(v, u)
    return _cop_h_ct_arr(fam, theta, vf, uf).reshape(shape)


def cop_logpdf(fam, theta, u, v):
    shape, uf, vf = _pair(u, v)
    return _cop_logpdf_arr(fam, theta, uf, vf).reshape(shape)


def cop_pdf(fam, theta, u, v):
    with np.errstate(over="ignore"):
        return np.exp(cop_logpdf(fam, theta, u, v))


def cop_hinv_ct(fam, theta, w, u):
    shape, wf, uf = _pair(w, u)
    return _cop_hinv_ct_arr(fam, theta, wf, uf).reshape(shape)


def loglik_terms(cop, theta, lfam, la, lb, ltau, cfam, ca, cb, p, y, delta):
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    delta = np.ascontiguousarray(np.asarray(delta, dtype=np.int64))
    terms, n_floored = _loglik_terms_arr(
        cop, theta, lfam, la, lb, ltau, cfam, ca, cb, p, y, delta
    )
    return terms, int(n_floored)


# ---------------------------------------------------------------------------
# compiled Nelder-Mead simplex search over the transformed parameter vector
# ---------------------------------------------------------------------------

@njit(cache=True)
def _marg_cdf_logpdf_fast(fam, a, b, log_a, log_b, yi, logyi, want_pdf):
    """Fused untruncated CDF and log-density using precomputed log(y).

    The transformed-parameter optimizer calls this once or twice per record;
    sharing the power term roughly halves the transcendental count.
    """
    if fam == MARG_WEIBULL:
        xpow = math.exp(b * (logyi - log_a))
        F = -math.expm1(-xpow)
        logf = log_b - b * log_a + (b - 1.0) * logyi - xpow if want_pdf else 0.0
        return F, logf
    if fam == MARG_LOGNORMAL:
        z = (logyi - b) / a
        F = _ndtr(z)
        logf = -logyi - log_a - 0.5 * _LOG_2PI - 0.5 * z * z if want_pdf else 0.0
        return F, logf
    if fam == MARG_LOGLOGISTIC:
        r = math.exp(b * (logyi - log_a))
        F = r / (1.0 + r)
        logf = (
            log_b - log_a + (b - 1.0) * (logyi - log_a) - 2.0 * math.log1p(r)
            if want_pdf
            else 0.0
        )
        return F, logf
    # gamma: a = shape, b = scale
    F = _gammainc_p(a, yi / b)
    if F < 0.0:
        F = 0.0
    elif F > 1.0:
        F = 1.0
    logf = (
        (a - 1.0) * logyi - yi / b - math.lgamma(a) - a * log_b if want_pdf else 0.0
    )
    return F, logf


@njit(cache=True)
def _negll_x(cop, lfam, cfam, ltau, x, y, logy, delta):
    """Negative log-likelihood at the unconstrained vector x.

    Layout: [theta'] (absent for independence), log-latency params
    (mu itself for log-normal), log-censoring params, logit(p).  Floored
    terms contribute log(1e-300) each, keeping the search alive through
    underflow regions.
    """
    i = 0
    theta = 0.0
    if cop != COP_INDEPENDENCE:
        if cop == COP_FRANK:
            theta = x[0]
        elif cop == COP_GUMBEL or cop == COP_JOE:
            theta = 1.0 + math.exp(x[0])
        elif cop == COP_GAUSSIAN:
            theta = math.tanh(x[0])
            if theta >= 1.0 - 1e-12:
                theta = 1.0 - 1e-12
            elif theta <= -1.0 + 1e-12:
                theta = -1.0 + 1e-12
        else:
            theta = math.exp(x[0])
        i = 1
    log_la = x[i]
    la = math.exp(log_la)
    if lfam == MARG_LOGNORMAL:
        lb = x[i + 1]
        log_lb = 0.0
    else:
        log_lb = x[i + 1]
        lb = math.exp(log_lb)
    log_ca = x[i + 2]
    ca = math.exp(log_ca)
    if cfam == MARG_LOGNORMAL:
        cb = x[i + 3]
        log_cb = 0.0
    else:
        log_cb = x[i + 3]
        cb = math.exp(log_cb)
    xp = x[i + 4]
    p = 1.0 / (1.0 + math.exp(-xp)) if xp < 36.0 else 1.0 - 1e-12
    if p < 1e-12:
        p = 1e-12
    if not (
        math.isfinite(theta)
        and math.isfinite(la)
        and math.isfinite(lb)
        and math.isfinite(ca)
        and math.isfinite(cb)
    ):
        return 800.0 * y.shape[0]

    truncated = math.isfinite(ltau)
    Ftau = _marg_ucdf(lfam, la, lb, ltau) if truncated else 1.0
    log_Ftau = math.log(Ftau) if truncated else 0.0
    logp = math.log(p)
    acc = 0.0
    for k in range(y.shape[0]):
        yi = y[k]
        logyi = logy[k]
        ev = delta[k] == 1
        Fu, lfu = _marg_cdf_logpdf_fast(lfam, la, lb, log_la, log_lb, yi, logyi, ev)
        Fc, lfc = _marg_cdf_logpdf_fast(cfam, ca, cb, log_ca, log_cb, yi, logyi, not ev)
        if truncated:
            Fu = 1.0 if yi >= ltau else min(Fu / Ftau, 1.0)
        u = _clamp(p * Fu)
        v = _clamp(Fc)
        if ev:
            if truncated:
                lfu = -math.inf if yi > ltau else lfu - log_Ftau
            br = 1.0 - _cop_h_ct(cop, theta, v, u)
            t = logp + lfu + (math.log(br) if br > 0.0 else -math.inf)
        else:
            br = 1.0 - _cop_h_tc(cop, theta, u, v)
            t = lfc + (math.log(br) if br > 0.0 else -math.inf)
        if math.isnan(t) or t < LOG_FLOOR or t == math.inf:
            t = LOG_FLOOR
        acc += t
    return -acc


@njit(cache=True)
def _nm_minimize(cop, lfam, cfam, ltau, x0, y, logy, delta, xatol, fatol, maxiter, maxfev):
    """Nelder-Mead with the standard coefficients; convergence when the
    simplex diameter is below xatol and the function spread below fatol."""
    n = x0.shape[0]
    rho, chi, psi, sigma = 1.0, 2.0, 0.5, 0.5
    sim = np.empty((n + 1, n))
    fsim = np.empty(n + 1)
    sim[0] = x0
    fsim[0] = _negll_x(cop, lfam, cfam, ltau, x0, y, logy, delta)
    fcalls = 1
    for k in range(n):
        yv = x0.copy()
        if yv[k] != 0.0:
            yv[k] = yv[k] * 1.05
        else:
            yv[k] = 0.00025
        sim[k + 1] = yv
        fsim[k + 1] = _negll_x(cop, lfam, cfam, ltau, yv, y, logy, delta)
        fcalls += 1
    order = np.argsort(fsim)
    sim = sim[order]
    fsim = fsim[order]

    iterations = 0
    converged = False
    while iterations < maxiter and fcalls < maxfev:
        dx = 0.0
        df = 0.0
        for j in range(1, n + 1):
            for k in range(n):
                d = abs(sim[j, k] - sim[0, k])
                if d > dx:
                    dx = d
            d = abs(fsim[j] - fsim[0])
            if d > df:
                df = d
        if dx <= xatol and df <= fatol:
            converged = True
            break

        xbar = np.zeros(n)
        for j in range(n):
            s = 0.0
            for m in range(n):
                s += sim[m, j]
            xbar[j] = s / n
        xr = (1.0 + rho) * xbar - rho * sim[n]
        fxr = _negll_x(cop, lfam, cfam, ltau, xr, y, logy, delta)
        fcalls += 1
        doshrink = False
        if fxr < fsim[0]:
            xe = (1.0 + rho * chi) * xbar - rho * chi * sim[n]
            fxe = _negll_x(cop, lfam, cfam, ltau, xe, y, logy, delta)
            fcalls += 1
            if fxe < fxr:
                sim[n] = xe
                fsim[n] = fxe
            else:
                sim[n] = xr
                fsim[n] = fxr
        else:
            if fxr < fsim[n - 1]:
                sim[n] = xr
                fsim[n] = fxr
            else:
                if fxr < fsim[n]:
                    xc = (1.0 + psi * rho) * xbar - psi * rho * sim[n]
                    fxc = _negll_x(cop, lfam, cfam, ltau, xc, y, logy, delta)
                    fcalls += 1
                    if fxc <= fxr:
                        sim[n] = xc
                        fsim[n] = fxc
                    else:
                        doshrink = True
                else:
                    xcc = (1.0 - psi) * xbar + psi * sim[n]
                    fxcc = _negll_x(cop, lfam, cfam, ltau, xcc, y, logy, delta)
                    fcalls += 1
                    if fxcc < fsim[n]:
                        sim[n] = xcc
                        fsim[n] = fxcc
                    else:
                        doshrink = True
                if doshrink:
                    for j in range(1, n + 1):
                        sim[j] = sim[0] + sigma * (sim[j] - sim[0])
                        fsim[j] = _negll_x(cop, lfam, cfam, ltau, sim[j], y, logy, delta)
                        fcalls += 1
        order = np.argsort(fsim)
        sim = sim[order]
        fsim = fsim[order]
        iterations += 1

    return sim[0], fsim[0], converged, iterations


def nm_multistart(cop, lfam, cfam, ltau, x0s, y, delta, xatol, fatol, maxiter):
    """Run the compiled simplex search from each row of x0s."""
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    logy = np.log(y)
    delta = np.ascontiguousarray(np.asarray(delta, dtype=np.int64))
    xs = np.empty_like(x0s)
    funs = np.empty(x0s.shape[0])
    conv = np.zeros(x0s.shape[0], dtype=bool)
    for i in range(x0s.shape[0]):
        xbest, fbest, ok, _ = _nm_minimize(
            cop, lfam, cfam, ltau, x0s[i].copy(), y, logy, delta,
            xatol, fatol, maxiter, 10 * maxiter,
        )
        xs[i] = xbest
        funs[i] = fbest
        conv[i] = ok
    return xs, funs, conv


def warmup():
    """Force compilation of the hot kernels (cached on disk afterwards)."""
    y = np.array([0.5, 1.5])
    d = np.array([1, 0])
    for cop in range(8):
        theta = {0: 0.0, 1: 5.0, 2: 2.0, 3: 2.0, 4: 1.0, 5: 1.0, 6: 1.0, 7: 0.5}[cop]
        loglik_terms(cop, theta, MARG_WEIBULL, 1.0, 1.0, math.inf,
                     MARG_WEIBULL, 1.0, 1.0, 0.8, y, d)
        u = np.array([0.3, 0.7])
        cop_cdf(cop, theta, u, u)
        cop_h_tc(cop, theta, u, u)
        cop_h_ct(cop, theta, u, u)
        cop_logpdf(cop, theta, u, u)
        cop_hinv_ct(cop, theta, u, u)
    for fam in range(4):
        marg_cdf(fam, 1.0, 1.0, math.inf, y)
        marg_pdf(fam, 1.0, 1.0, 2.0, y)
        marg_logpdf(fam, 1.0, 1.0, math.inf, y)
        marg_ppf(fam, 1.0, 1.0, math.inf, np.array([0.25, 0.5]))
