"""Bivariate copula families: CDF, h-functions, density, Kendall's tau,
conditional sampling and identifiability-limit diagnostics.

Eight families are implemented; the three Clayton variants are rotations
of the strict (theta > 0) base Clayton copula, which is itself not exposed.
Arguments u, v are clamped to [1e-15, 1 - 1e-15] inside the kernels, since
likelihood evaluation legitimately produces marginal CDF values of exactly
0 or 1.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from . import backend
from .backend.codes import COPULA_NAMES, FRANK_INDEP_TOL
from .errors import DomainError, ParameterError


class CopulaFamily(str, enum.Enum):
    INDEPENDENCE = "independence"
    FRANK = "frank"
    GUMBEL = "gumbel"
    JOE = "joe"
    CLAYTON90 = "clayton90"
    CLAYTON180 = "clayton180"
    CLAYTON270 = "clayton270"
    GAUSSIAN = "gaussian"

    @property
    def code(self) -> int:
        return COPULA_NAMES[self.value]

    @classmethod
    def parse(cls, name: str) -> "CopulaFamily":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ParameterError(f"unknown copula family {name!r}; valid: {valid}") from None


#: Attainable Kendall's tau range per family (open at the endpoints).
TAU_RANGES = {
    CopulaFamily.INDEPENDENCE: (0.0, 0.0),
    CopulaFamily.FRANK: (-1.0, 1.0),
    CopulaFamily.GUMBEL: (0.0, 1.0),
    CopulaFamily.JOE: (0.0, 1.0),
    CopulaFamily.CLAYTON90: (-1.0, 0.0),
    CopulaFamily.CLAYTON180: (0.0, 1.0),
    CopulaFamily.CLAYTON270: (-1.0, 0.0),
    CopulaFamily.GAUSSIAN: (-1.0, 1.0),
}


def validate_theta(family: CopulaFamily, theta) -> float | None:
    """Check theta against the family domain; returns the normalized value."""
    if family is CopulaFamily.INDEPENDENCE:
        if theta is not None:
            raise ParameterError("independence copula carries no association parameter")
        return None
    if theta is None:
        raise ParameterError(f"{family.value} copula requires an association parameter")
    th = float(theta)
    if not math.isfinite(th):
        raise ParameterError(f"{family.value}: theta must be finite, got {th}")
    if family is CopulaFamily.FRANK:
        return th  # |theta| < 1e-8 dispatches to independence
    if family in (CopulaFamily.GUMBEL, CopulaFamily.JOE):
        if th < 1.0:
            raise ParameterError(f"{family.value}: theta must lie in [1, inf), got {th}")
    elif family in (CopulaFamily.CLAYTON90, CopulaFamily.CLAYTON180, CopulaFamily.CLAYTON270):
        if th <= 0.0:
            raise ParameterError(f"{family.value}: theta must lie in (0, inf), got {th}")
    elif family is CopulaFamily.GAUSSIAN:
        if not -1.0 < th < 1.0:
            raise ParameterError(f"gaussian: theta must lie in (-1, 1), got {th}")
    return th


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family together with its association parameter."""

    family: CopulaFamily
    theta: float | None = None

    def __post_init__(self):
        if not isinstance(self.family, CopulaFamily):
            object.__setattr__(self, "family", CopulaFamily.parse(self.family))
        object.__setattr__(self, "theta", validate_theta(self.family, self.theta))

    @property
    def _theta(self) -> float:
        return 0.0 if self.theta is None else self.theta


def _as_float_result(like, out):
    if np.isscalar(like) or getattr(like, "ndim", None) == 0:
        return float(out)
    return out


def _check_unit(name, *vals):
    for x in vals:
        if np.any((np.asarray(x) < 0.0) | (np.asarray(x) > 1.0)):
            raise DomainError(f"{name}: arguments must lie in [0, 1]")


def copula_cdf(spec: CopulaSpec, u, v):
    """C(u, v)."""
    _check_unit("copula_cdf", u, v)
    out = backend.kernels.cop_cdf(spec.family.code, spec._theta, u, v)
    return _as_float_result(u, out)


def h_t_given_c(spec: CopulaSpec, u, v):
    """Conditional CDF of the first coordinate given the second: dC/dv at (u, v)."""
    _check_unit("h_t_given_c", u, v)
    out = backend.kernels.cop_h_tc(spec.family.code, spec._theta, u, v)
    return _as_float_result(u, out)


def h_c_given_t(spec: CopulaSpec, v, u):
    """Conditional CDF of the second coordinate given the first: dC/du at (u, v)."""
    _check_unit("h_c_given_t", u, v)
    out = backend.kernels.cop_h_ct(spec.family.code, spec._theta, v, u)
    return _as_float_result(v, out)


def copula_density(spec: CopulaSpec, u, v):
    """c(u, v) = d2C/du dv."""
    _check_unit("copula_density", u, v)
    out = backend.kernels.cop_pdf(spec.family.code, spec._theta, u, v)
    return _as_float_result(u, out)


def h_inverse_c_given_t(spec: CopulaSpec, w, u):
    """Solve h_c_given_t(v | u) = w for v."""
    _check_unit("h_inverse_c_given_t", w, u)
    out = backend.kernels.cop_hinv_ct(spec.family.code, spec._theta, w, u)
    return _as_float_result(w, out)


# ---------------------------------------------------------------------------
# Kendall's tau
# ---------------------------------------------------------------------------

def _debye1(x: float) -> float:
    # D1(x) = (1/x) int_0^x t / (e^t - 1) dt, x > 0
    def integrand(t):
        if t <= 0.0:
            return 1.0
        if t > 50.0:  # 1/(e^t - 1) ~ e^-t; avoids expm1 overflow
            return t * math.exp(-t)
        return t / math.expm1(t)

    val, _ = scipy.integrate.quad(integrand, 0.0, min(x, 750.0))
    return val / x


def _joe_tau(theta: float) -> float:
    # Archimedean identity tau = 1 + 4 int_0^1 phi(t)/phi'(t) dt with
    # phi(t) = -log(1 - (1-t)^theta)
    def integrand(t):
        lx = theta * math.log1p(-t)
        if lx < -500.0:
            one_minus_x = 1.0
            log_one_minus_x = 0.0
        else:
            x = math.exp(lx)
            one_minus_x = 1.0 - x
            if one_minus_x <= 0.0:
                return 0.0
            log_one_minus_x = math.log1p(-x)
        return (
            log_one_minus_x
            * one_minus_x
            / (theta * math.exp((theta - 1.0) * math.log1p(-t)))
        )

    val, _ = scipy.integrate.quad(integrand, 0.0, 1.0, limit=200)
    return 1.0 + 4.0 * val


def kendall_tau(spec: CopulaSpec) -> float:
    """Kendall's tau, by the standard closed form of each family."""
    th = spec._theta
    fam = spec.family
    if fam is CopulaFamily.INDEPENDENCE:
        return 0.0
    if fam is CopulaFamily.FRANK:
        if abs(th) < FRANK_INDEP_TOL:
            return 0.0
        a = abs(th)
        tau = 1.0 - 4.0 / a * (1.0 - _debye1(a))
        return math.copysign(tau, th)
    if fam is CopulaFamily.GUMBEL:
        return 1.0 - 1.0 / th
    if fam is CopulaFamily.JOE:
        if th == 1.0:
            return 0.0
        return _joe_tau(th)
    if fam is CopulaFamily.CLAYTON90:
        return -th / (th + 2.0)
    if fam is CopulaFamily.CLAYTON180:
        return th / (th + 2.0)
    if fam is CopulaFamily.CLAYTON270:
        return -th / (th + 2.0)
    # gaussian
    return 2.0 / math.pi * math.asin(th)


def unit_grid(order: int = 20):
    """Composite Gauss-Legendre nodes/weights on (0, 1) with geometric
    panels clustered at both endpoints.

    Tail-dependent copula densities have integrable corner singularities, so
    a single global rule stalls around 1e-5 accuracy; geometric refinement
    (panel ratio sqrt(10) down to 1e-12) restores near-spectral convergence.
    """
    ladder = np.logspace(-12.0, -1.0, 23)
    edges = np.concatenate(([0.0], ladder, [0.3, 0.5, 0.7], 1.0 - ladder[::-1], [1.0]))
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = []
    wts = []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * (x + 1.0) + a)
        wts.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(wts)


def kendall_tau_integral(spec: CopulaSpec, order: int = 20) -> float:
    """Kendall's tau as 4 * int int C(u,v) c(u,v) du dv - 1 on a tensor
    composite Gauss-Legendre grid; the numeric cross-check for the closed
    forms."""
    nodes, wts = unit_grid(order)
    U, V = np.meshgrid(nodes, nodes, indexing="ij")
    C = backend.kernels.cop_cdf(spec.family.code, spec._theta, U, V)
    c = backend.kernels.cop_pdf(spec.family.code, spec._theta, U, V)
    return 4.0 * float(wts @ (C * c) @ wts) - 1.0


def tau_range(family: CopulaFamily) -> tuple[float, float]:
    return TAU_RANGES[family]


def _bisect_theta(family: CopulaFamily, tau: float, lo: float, hi: float) -> float:
    f = lambda th: kendall_tau(CopulaSpec(family, th)) - tau
    # expand the bracket upward until it contains the root
    while f(hi) < 0.0:
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            raise DomainError(f"{family.value}: tau={tau} not reachable")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def theta_from_tau(family: CopulaFamily, tau: float) -> float | None:
    """Invert kendall_tau; raises DomainError for unattainable tau values."""
    if isinstance(family, str):
        family = CopulaFamily.parse(family)
    return _theta_from_tau_cached(family, float(tau))


@functools.lru_cache(maxsize=4096)
def _theta_from_tau_cached(family: CopulaFamily, tau: float) -> float | None:
    lo, hi = TAU_RANGES[family]

    if family is CopulaFamily.INDEPENDENCE:
        if tau != 0.0:
            raise DomainError("independence: only tau = 0 is attainable")
        return None
    if not lo < tau < hi:
        if family in (CopulaFamily.GUMBEL, CopulaFamily.JOE) and tau == 0.0:
            return 1.0
        raise DomainError(
            f"{family.value}: tau={tau} outside attainable range ({lo}, {hi})"
        )

    if family is CopulaFamily.FRANK:
        if tau == 0.0:
            return 0.0  # independence sentinel (theta -> 0 limit)
        mag = _bisect_theta(CopulaFamily.FRANK, abs(tau), 1e-9, 1.0)
        return math.copysign(mag, tau)
    if family is CopulaFamily.GUMBEL:
        return 1.0 / (1.0 - tau)
    if family is CopulaFamily.JOE:
        return _bisect_theta(CopulaFamily.JOE, tau, 1.0 + 1e-12, 2.0)
    if family is CopulaFamily.CLAYTON90 or family is CopulaFamily.CLAYTON270:
        return 2.0 * (-tau) / (1.0 + tau)
    if family is CopulaFamily.CLAYTON180:
        return 2.0 * tau / (1.0 - tau)
    # gaussian
    return math.sin(math.pi * tau / 2.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_pair(spec: CopulaSpec, rng: np.random.Generator, size: int | None = None):
    """Draw (u, v) distributed as C via the conditional-inverse construction.

    u and an auxiliary w are iid uniform; v solves h_c_given_t(v | u) = w.
    """
    n = 1 if size is None else int(size)
    u = rng.random(n)
    w = rng.random(n)
    v = backend.kernels.cop_hinv_ct(spec.family.code, spec._theta, w, u)
    if size is None:
        return float(u[0]), float(v[0])
    return u, v


# ---------------------------------------------------------------------------
# identifiability-limit diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitDiagnostic:
    name: str
    value: float
    passed: bool


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Numeric check of the h-function limit conditions; advisory only."""

    diagnostics: tuple[LimitDiagnostic, ...]
    threshold: float

    @property
    def passed(self) -> bool:
        return all(d.passed for d in self.diagnostics)

    def __str__(self) -> str:
        lines = [f"identifiability limits (threshold {self.threshold:g})"]
        for d in self.diagnostics:
            lines.append(f"  {'PASS' if d.passed else 'FAIL'}  {d.name} = {d.value:.3e}")
        return "\n".join(lines)


def check_identifiability_limits(model, alpha, threshold: float = 1e-4) -> IdentifiabilityReport:
    """Evaluate the model's h-functions along y -> 0 (and y -> inf) grids.

    Checks that h_{T|C,alpha}(y) vanishes in at least one tail and that
    h_{C|T,alpha}(y) vanishes at zero, plus the family-specific side
    conditions for the Gumbel (log-CDF ratio positive at zero) and Gaussian
    (normal-score difference diverging to -inf) copulas.  Never blocks
    fitting.
    """
    from .marginals import quantile  # local import to avoid cycles at module load

    K = backend.kernels
    fam = model.copula if isinstance(model.copula, CopulaFamily) else CopulaFamily.parse(model.copula)
    theta = 0.0 if alpha.theta is None else float(alpha.theta)
    p = float(alpha.p)
    lat, cen = model.latency, model.censoring
    la, lb = alpha.latency_params.a, alpha.latency_params.b
    ca, cb = alpha.censoring_params.a, alpha.censoring_params.b

    y_anchor = min(
        quantile(type(lat)(lat.family, None), alpha.latency_params, 1e-4),
        quantile(cen, alpha.censoring_params, 1e-4),
    )
    y_zero = y_anchor * np.logspace(0.0, -8.0, 9)
    y_hi_anchor = max(
        quantile(cen, alpha.censoring_params, 1.0 - 1e-9),
        lat.tau if lat.truncation is not None
        else quantile(lat, alpha.latency_params, 1.0 - 1e-9),
    )
    y_inf = y_hi_anchor * np.logspace(0.0, 4.0, 5)

    def h_pair(y):
        u = p * K.marg_cdf(lat.family.code, la, lb, lat.tau, y)
        v = K.marg_cdf(cen.family.code, ca, cb, math.inf, y)
        h_tc = K.cop_h_tc(fam.code, theta, u, v)
        h_ct = K.cop_h_ct(fam.code, theta, v, u)
        return u, v, h_tc, h_ct

    u0, v0, h_tc_0, h_ct_0 = h_pair(y_zero)
    _, _, h_tc_inf, _ = h_pair(y_inf)

    diags = [
        LimitDiagnostic("h_TC limit at 0", float(h_tc_0[-1]), h_tc_0[-1] < threshold),
        LimitDiagnostic("h_TC limit at inf", float(h_tc_inf[-1]), h_tc_inf[-1] < threshold),
        LimitDiagnostic("h_CT limit at 0", float(h_ct_0[-1]), h_ct_0[-1] < threshold),
    ]
    # the first condition needs only one of the two h_TC tails to vanish
    either = diags[0].passed or diags[1].passed
    diags[0] = LimitDiagnostic(diags[0].name, diags[0].value, diags[0].passed or either)
    diags[1] = LimitDiagnostic(diags[1].name, diags[1].value, diags[1].passed or either)

    if fam is CopulaFamily.GUMBEL:
        with np.errstate(divide="ignore"):
            ratio = np.log(np.clip(v0, 1e-300, None)) / np.log(np.clip(u0, 1e-300, None))
        diags.append(
            LimitDiagnostic("gumbel log-CDF ratio at 0", float(ratio[-1]), ratio[-1] > 0.0)
        )
    if fam is CopulaFamily.GAUSSIAN:
        if theta <= 0.0:
            # analytically -inf for theta <= 0
            diags.append(LimitDiagnostic("gaussian score difference at 0", -math.inf, True))
        else:
            import scipy.special as sc

            z = sc.ndtri(np.clip(v0, 1e-300, 1.0)) - theta * sc.ndtri(np.clip(u0, 1e-300, 1.0))
            diags.append(
                LimitDiagnostic("gaussian score difference at 0", float(z[-1]), z[-1] < -10.0)
            )
    return IdentifiabilityReport(tuple(diags), threshold)
