"""Pure-numpy kernel backend.

Vectorized implementations of the marginal and copula primitives plus the
observed-data log-likelihood terms.  Special functions come from
``scipy.special``; the numba backend carries its own self-contained
equivalents, and the two are cross-checked in the test suite.

All functions take float64 arrays for the data arguments and plain floats
for parameters.  Inputs are assumed pre-validated; u/v values are clamped
to ``[UV_EPS, 1 - UV_EPS]`` here because likelihood evaluation legitimately
produces exact 0/1 marginal CDF values.
"""

import math

import numpy as np
import scipy.special as sc

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

NAME = "numpy"

LOG_FLOOR = math.log(DENSITY_FLOOR)

# Gauss-Legendre rule used for the Gaussian copula CDF (integral of the
# bivariate normal density over the correlation parameter).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _clamp01(x):
    return np.clip(x, UV_EPS, 1.0 - UV_EPS)


# ---------------------------------------------------------------------------
# marginal families
# ---------------------------------------------------------------------------

def _ucdf(fam, a, b, t):
    """Untruncated CDF. a, b follow the public parameter order per family."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if fam == MARG_WEIBULL:
            out = -np.expm1(-((t / a) ** b))
        elif fam == MARG_LOGNORMAL:
            out = np.where(t > 0.0, sc.ndtr((np.log(np.maximum(t, 1e-300)) - b) / a), 0.0)
        elif fam == MARG_LOGLOGISTIC:
            r = (t / a) ** b
            out = np.where(t > 0.0, r / (1.0 + r), 0.0)
        elif fam == MARG_GAMMA:
            out = sc.gammainc(a, t / b)
        else:
            raise ValueError(f"unknown marginal family code {fam}")
    return np.clip(out, 0.0, 1.0)


def _ulogpdf(fam, a, b, t):
    """Untruncated log-density; +/-inf at t = 0 per the shape parameter."""
    t = np.asarray(t, dtype=np.float64)
    tt = np.where(t > 0.0, t, 1.0)  # placeholder, fixed up below
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if fam == MARG_WEIBULL:
            out = math.log(b) - b * math.log(a) + (b - 1.0) * np.log(tt) - (tt / a) ** b
            at0 = math.inf if b < 1.0 else (math.log(b) - b * math.log(a) if b == 1.0 else -math.inf)
        elif fam == MARG_LOGNORMAL:
            z = (np.log(tt) - b) / a
            out = -np.log(tt) - math.log(a) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z
            at0 = -math.inf
        elif fam == MARG_LOGLOGISTIC:
            out = (
                math.log(b)
                - math.log(a)
                + (b - 1.0) * (np.log(tt) - math.log(a))
                - 2.0 * np.log1p((tt / a) ** b)
            )
            at0 = math.inf if b < 1.0 else (-math.log(a) if b == 1.0 else -math.inf)
        elif fam == MARG_GAMMA:
            out = (a - 1.0) * np.log(tt) - tt / b - math.lgamma(a) - a * math.log(b)
            at0 = math.inf if a < 1.0 else (-math.log(b) if a == 1.0 else -math.inf)
        else:
            raise ValueError(f"unknown marginal family code {fam}")
    return np.where(t > 0.0, out, at0)


def _uppf(fam, a, b, q):
    q = np.asarray(q, dtype=np.float64)
    if fam == MARG_WEIBULL:
        return a * (-np.log1p(-q)) ** (1.0 / b)
    if fam == MARG_LOGNORMAL:
        return np.exp(b + a * sc.ndtri(q))
    if fam == MARG_LOGLOGISTIC:
        return a * (q / (1.0 - q)) ** (1.0 / b)
    if fam == MARG_GAMMA:
        return b * sc.gammaincinv(a, q)
    raise ValueError(f"unknown marginal family code {fam}")


def marg_cdf(fam, a, b, tau, t):
    """CDF, optionally right-truncated at tau (tau = inf means untruncated)."""
    t = np.asarray(t, dtype=np.float64)
    F = _ucdf(fam, a, b, t)
    if math.isfinite(tau):
        F = np.where(t >= tau, 1.0, np.minimum(F / _ucdf(fam, a, b, tau), 1.0))
    return F


def marg_pdf(fam, a, b, tau, t):
    """Density; the truncated value is exactly untruncated-pdf / untruncated-cdf(tau)."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        f = np.exp(_ulogpdf(fam, a, b, t))
    if math.isfinite(tau):
        f = np.where(t > tau, 0.0, f / _ucdf(fam, a, b, tau))
    return f


def marg_logpdf(fam, a, b, tau, t):
    t = np.asarray(t, dtype=np.float64)
    lf = _ulogpdf(fam, a, b, t)
    if math.isfinite(tau):
        lf = np.where(t > tau, -math.inf, lf - math.log(_ucdf(fam, a, b, tau)))
    return lf


def marg_ppf(fam, a, b, tau, q):
    q = np.asarray(q, dtype=np.float64)
    if math.isfinite(tau):
        t = _uppf(fam, a, b, q * _ucdf(fam, a, b, tau))
        return np.minimum(t, tau)
    return _uppf(fam, a, b, q)


# ---------------------------------------------------------------------------
# base Clayton pieces (rotations are built on these)
# ---------------------------------------------------------------------------

def _clayton_logs(theta, u, v):
    # log(u^-theta + v^-theta - 1).  The h-function raises S to -(theta+1)/theta,
    # which amplifies absolute error in log S by 1/theta, so the small-exponent
    # branch must be relative-accurate: S - 1 = expm1(x) + expm1(y).
    x = -theta * np.log(u)
    y = -theta * np.log(v)
    small = np.maximum(x, y) < 500.0
    xs = np.where(small, x, 0.0)
    ys = np.where(small, y, 0.0)
    out_small = np.log1p(np.expm1(xs) + np.expm1(ys))
    m = np.maximum(x, y)
    with np.errstate(over="ignore"):
        out_big = m + np.log(np.exp(x - m) + np.exp(y - m) - np.exp(-m))
    return np.where(small, out_small, out_big)


def _clayton_cdf(theta, u, v):
    return np.exp(-_clayton_logs(theta, u, v) / theta)


def _clayton_h_tc(theta, u, v):
    # dC/dv = v^-(theta+1) * S^-(theta+1)/theta
    logs = _clayton_logs(theta, u, v)
    return np.exp(-(theta + 1.0) * np.log(v) - (theta + 1.0) / theta * logs)


def _clayton_logpdf(theta, u, v):
    logs = _clayton_logs(theta, u, v)
    return (
        math.log1p(theta)
        - (theta + 1.0) * (np.log(u) + np.log(v))
        - (2.0 * theta + 1.0) / theta * logs
    )


def _clayton_hinv_ct(theta, w, u):
    # solve w = dC/du for v:  v = (1 + u^-theta (w^(-theta/(theta+1)) - 1))^(-1/theta)
    with np.errstate(over="ignore", divide="ignore"):
        term = np.expm1(-theta / (theta + 1.0) * np.log(w))
        z = term * np.exp(-theta * np.log(u))
        return np.exp(-np.log1p(z) / theta)


# ---------------------------------------------------------------------------
# copula primitives
# ---------------------------------------------------------------------------

def _frank_cdf(theta, u, v):
    if theta < 0.0:
        # direct evaluation is stable for negative association
        return (
            -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / math.expm1(-theta))
            / theta
        )
    # exact rearrangement avoiding 1 - eps cancellation at large theta:
    # C = -(1/theta) [log(e^-tu + e^-tv - e^-t(u+v) - e^-t) - log(1 - e^-t)]
    m = -theta * np.minimum(u, v)
    inner = (
        np.exp(-theta * u - m)
        + np.exp(-theta * v - m)
        - np.exp(-theta * (u + v) - m)
        - np.exp(-theta - m)
    )
    return -(m + np.log(inner) - math.log(-math.expm1(-theta))) / theta


def _frank_h_tc(theta, u, v):
    # logistic form of e^-tv (e^-tu - 1) / [e^-t - 1 + (e^-tu - 1)(e^-tv - 1)]
    with np.errstate(over="ignore"):
        ratio = np.exp(theta * v) * np.expm1(-theta * (1.0 - u)) / (-np.expm1(theta * u))
    return 1.0 / (1.0 + ratio)


def _frank_logpdf(theta, u, v):
    if theta < 0.0:
        # Frank is radially symmetric: c_{-t}(u, v) = c_t(1-u, v)
        return _frank_logpdf(-theta, 1.0 - u, v)
    denom = -math.expm1(-theta) - np.expm1(-theta * u) * np.expm1(-theta * v)
    return (
        math.log(theta)
        + math.log(-math.expm1(-theta))
        - theta * (u + v)
        - 2.0 * np.log(denom)
    )


def _frank_hinv_ct(theta, w, u):
    # v = -(1/theta) log[(a(1-w) + w e^-theta) / (w + a(1-w))], a = e^-theta*u
    with np.errstate(over="ignore"):
        a1w = np.exp(-theta * u) * (1.0 - w)
        return -(np.log(a1w + w * math.exp(-theta)) - np.log(w + a1w)) / theta


def _gumbel_logs(theta, u, v):
    x = theta * np.log(-np.log(u))
    y = theta * np.log(-np.log(v))
    return np.logaddexp(x, y)


def _gumbel_cdf(theta, u, v):
    return np.exp(-np.exp(_gumbel_logs(theta, u, v) / theta))


def _gumbel_h_tc(theta, u, v):
    logs = _gumbel_logs(theta, u, v)
    A = np.exp(logs / theta)
    return np.exp(
        -A + (theta - 1.0) * np.log(-np.log(v)) - np.log(v) - (theta - 1.0) / theta * logs
    )


def _gumbel_logpdf(theta, u, v):
    logs = _gumbel_logs(theta, u, v)
    A = np.exp(logs / theta)
    return (
        -A
        + (theta - 1.0) * (np.log(-np.log(u)) + np.log(-np.log(v)))
        - np.log(u)
        - np.log(v)
        + (2.0 / theta - 2.0) * logs
        + np.log1p((theta - 1.0) / A)
    )


def _log1mexp(a):
    # log(1 - e^a) for a <= 0
    return np.where(a < -math.log(2.0), np.log1p(-np.exp(a)), np.log(-np.expm1(np.minimum(a, 0.0))))


def _joe_logs(theta, u, v):
    # log(x + y - xy), x = (1-u)^theta, y = (1-v)^theta
    a = theta * np.log1p(-u)
    b = theta * np.log1p(-v)
    m = np.maximum(a, b)
    return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(a + b - m))


def _joe_cdf(theta, u, v):
    return -np.expm1(_joe_logs(theta, u, v) / theta)


def _joe_h_tc(theta, u, v):
    logs = _joe_logs(theta, u, v)
    a = theta * np.log1p(-u)
    return np.exp((1.0 / theta - 1.0) * logs + _log1mexp(a) + (theta - 1.0) * np.log1p(-v))


def _joe_logpdf(theta, u, v):
    logs = _joe_logs(theta, u, v)
    S = np.exp(logs)
    return (
        (1.0 / theta - 2.0) * logs
        + (theta - 1.0) * (np.log1p(-u) + np.log1p(-v))
        + np.log(theta - 1.0 + S)
    )


def _gauss_cdf(theta, u, v):
    # C(u, v) = uv + int_0^theta phi2(x, y; r) dr  (single-integral identity)
    x = sc.ndtri(u)
    y = sc.ndtri(v)
    r = 0.5 * theta * (_GL_X + 1.0)          # nodes on [0, theta]
    wts = 0.5 * theta * _GL_W
    xx = x[..., None]
    yy = y[..., None]
    s2 = 1.0 - r * r
    dens = np.exp(-(xx * xx - 2.0 * r * xx * yy + yy * yy) / (2.0 * s2)) / (
        2.0 * math.pi * np.sqrt(s2)
    )
    return u * v + dens @ wts


def _gauss_h_tc(theta, u, v):
    s = math.sqrt(1.0 - theta * theta)
    return sc.ndtr((sc.ndtri(u) - theta * sc.ndtri(v)) / s)


def _gauss_logpdf(theta, u, v):
    x = sc.ndtri(u)
    y = sc.ndtri(v)
    s2 = 1.0 - theta * theta
    return -0.5 * math.log(s2) + (2.0 * theta * x * y - theta * theta * (x * x + y * y)) / (
        2.0 * s2
    )


def _gauss_hinv_ct(theta, w, u):
    s = math.sqrt(1.0 - theta * theta)
    return sc.ndtr(theta * sc.ndtri(u) + s * sc.ndtri(w))


def _is_indep(fam, theta):
    if fam == COP_INDEPENDENCE:
        return True
    if fam == COP_FRANK and abs(theta) < FRANK_INDEP_TOL:
        return True
    if fam in (COP_GUMBEL, COP_JOE) and theta == 1.0:
        return True
    if fam in (COP_CLAYTON90, COP_CLAYTON180, COP_CLAYTON270) and theta < 1e-12:
        return True
    if fam == COP_GAUSSIAN and theta == 0.0:
        return True
    return False


def cop_cdf(fam, theta, u, v):
    """Copula CDF C(u, v)."""
    u = _clamp01(np.asarray(u, dtype=np.float64))
    v = _clamp01(np.asarray(v, dtype=np.float64))
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
    if fam == COP_GAUSSIAN:
        return _gauss_cdf(theta, u, v)
    raise ValueError(f"unknown copula family code {fam}")


def cop_h_tc(fam, theta, u, v):
    """h_{T|C}(u | v) = dC/dv evaluated at (u, v)."""
    u = _clamp01(np.asarray(u, dtype=np.float64))
    v = _clamp01(np.asarray(v, dtype=np.float64))
    if _is_indep(fam, theta):
        return u + 0.0 * v
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
    if fam == COP_GAUSSIAN:
        return _gauss_h_tc(theta, u, v)
    raise ValueError(f"unknown copula family code {fam}")


def cop_h_ct(fam, theta, v, u):
    """h_{C|T}(v | u) = dC/du evaluated at (u, v)."""
    u = _clamp01(np.asarray(u, dtype=np.float64))
    v = _clamp01(np.asarray(v, dtype=np.float64))
    if _is_indep(fam, theta):
        return v + 0.0 * u
    if fam == COP_FRANK:
        return _frank_h_tc(theta, v, u)  # exchangeable
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
    if fam == COP_GAUSSIAN:
        return _gauss_h_tc(theta, v, u)
    raise ValueError(f"unknown copula family code {fam}")


def cop_logpdf(fam, theta, u, v):
    """Log copula density log c(u, v)."""
    u = _clamp01(np.asarray(u, dtype=np.float64))
    v = _clamp01(np.asarray(v, dtype=np.float64))
    if _is_indep(fam, theta):
        return 0.0 * (u + v)
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
    if fam == COP_GAUSSIAN:
        return _gauss_logpdf(theta, u, v)
    raise ValueError(f"unknown copula family code {fam}")


def cop_pdf(fam, theta, u, v):
    with np.errstate(over="ignore"):
        return np.exp(cop_logpdf(fam, theta, u, v))


def _hinv_bisect(fam, theta, w, u):
    lo = np.full_like(w, UV_EPS)
    hi = np.full_like(w, 1.0 - UV_EPS)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = cop_h_ct(fam, theta, mid, u) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < 1e-12:
            break
    return 0.5 * (lo + hi)


def cop_hinv_ct(fam, theta, w, u):
    """Solve h_{C|T}(v | u) = w for v (conditional quantile of V given U=u)."""
    w = _clamp01(np.asarray(w, dtype=np.float64))
    u = _clamp01(np.asarray(u, dtype=np.float64))
    if _is_indep(fam, theta):
        return w + 0.0 * u
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
    elif fam in (COP_GUMBEL, COP_JOE):
        out = _hinv_bisect(fam, theta, w, u)
    else:
        raise ValueError(f"unknown copula family code {fam}")
    return _clamp01(out)


# ---------------------------------------------------------------------------
# observed-data log-likelihood terms
# ---------------------------------------------------------------------------

def loglik_terms(cop, theta, lfam, la, lb, ltau, cfam, ca, cb, p, y, delta):
    """Per-record log density of (Y, Delta) under the cure model.

    Returns ``(terms, n_floored)`` where floored entries were clipped at
    ``log(DENSITY_FLOOR)`` because the density term underflowed or the
    h-function bracket collapsed to zero.
    """
    y = np.asarray(y, dtype=np.float64)
    delta = np.asarray(delta)
    Fu = marg_cdf(lfam, la, lb, ltau, y)
    Fc = _ucdf(cfam, ca, cb, y)
    u = _clamp01(p * Fu)
    v = _clamp01(Fc)

    ev = delta == 1
    terms = np.empty_like(y)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if np.any(ev):
            bracket = 1.0 - cop_h_ct(cop, theta, v[ev], u[ev])
            terms[ev] = (
                math.log(p)
                + marg_logpdf(lfam, la, lb, ltau, y[ev])
                + np.log(np.maximum(bracket, 0.0))
            )
        if not np.all(ev):
            ce = ~ev
            bracket = 1.0 - cop_h_tc(cop, theta, u[ce], v[ce])
            terms[ce] = _ulogpdf(cfam, ca, cb, y[ce]) + np.log(np.maximum(bracket, 0.0))

    bad = ~np.isfinite(terms) | (terms < LOG_FLOOR)
    n_floored = int(np.count_nonzero(bad))
    if n_floored:
        terms = np.where(bad, LOG_FLOOR, terms)
    return terms, n_floored
