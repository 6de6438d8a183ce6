"""Parametric univariate lifetime distributions with optional right truncation.

Four families are supported.  The two-parameter container follows a fixed
per-family order:

==============  =========  =========
family          a          b
==============  =========  =========
weibull         scale      shape
lognormal       sigma      mu (of log t; any real)
loglogistic     scale      shape
gamma           shape      scale
==============  =========  =========

A finite truncation point ``tau`` renormalizes the distribution to
``[0, tau]``: the truncated CDF equals the untruncated CDF divided by its
value at ``tau`` (clamped to 1 from ``tau`` on), and the truncated density
is the untruncated density divided by the same normalizer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .backend.codes import MARGINAL_NAMES
from .errors import DomainError, ParameterError


class MarginalFamily(str, enum.Enum):
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"
    LOGLOGISTIC = "loglogistic"
    GAMMA = "gamma"

    @property
    def code(self) -> int:
        return MARGINAL_NAMES[self.value]

    @classmethod
    def parse(cls, name: str) -> "MarginalFamily":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown marginal family {name!r}; valid: {valid}") from None


#: Human-readable parameter names per family, in (a, b) order.
PARAM_NAMES = {
    MarginalFamily.WEIBULL: ("scale", "shape"),
    MarginalFamily.LOGNORMAL: ("sigma", "mu"),
    MarginalFamily.LOGLOGISTIC: ("scale", "shape"),
    MarginalFamily.GAMMA: ("shape", "scale"),
}


@dataclass(frozen=True)
class MarginalParams:
    """Two-parameter vector; the role of (a, b) depends on the family."""

    a: float
    b: float


@dataclass(frozen=True)
class MarginalSpec:
    """A distribution family plus an optional right-truncation point."""

    family: MarginalFamily
    truncation: float | None = None

    def __post_init__(self):
        if self.truncation is not None:
            tau = float(self.truncation)
            if not math.isfinite(tau) or tau <= 0.0:
                raise ParameterError(f"truncation point must be finite and > 0, got {tau}")
            object.__setattr__(self, "truncation", tau)
        if not isinstance(self.family, MarginalFamily):
            object.__setattr__(self, "family", MarginalFamily.parse(self.family))

    @property
    def tau(self) -> float:
        """Truncation point as a float, +inf when untruncated."""
        return math.inf if self.truncation is None else self.truncation


def validate_params(spec: MarginalSpec, params: MarginalParams) -> None:
    a, b = float(params.a), float(params.b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ParameterError(f"non-finite marginal parameters ({a}, {b})")
    if a <= 0.0:
        raise ParameterError(
            f"{spec.family.value}: parameter '{PARAM_NAMES[spec.family][0]}' must be > 0, got {a}"
        )
    if spec.family is not MarginalFamily.LOGNORMAL and b <= 0.0:
        raise ParameterError(
            f"{spec.family.value}: parameter '{PARAM_NAMES[spec.family][1]}' must be > 0, got {b}"
        )


def _as_float_result(x, out):
    if np.isscalar(x) or getattr(x, "ndim", None) == 0:
        return float(out)
    return out


def pdf(spec: MarginalSpec, params: MarginalParams, t):
    """Density at ``t`` (scalar or array-like, all entries >= 0)."""
    validate_params(spec, params)
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("pdf: t must be >= 0")
    out = backend.kernels.marg_pdf(spec.family.code, params.a, params.b, spec.tau, arr)
    return _as_float_result(t, out)


def logpdf(spec: MarginalSpec, params: MarginalParams, t):
    """Log-density at ``t``."""
    validate_params(spec, params)
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("logpdf: t must be >= 0")
    out = backend.kernels.marg_logpdf(spec.family.code, params.a, params.b, spec.tau, arr)
    return _as_float_result(t, out)


def cdf(spec: MarginalSpec, params: MarginalParams, t):
    """Distribution function at ``t``."""
    validate_params(spec, params)
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("cdf: t must be >= 0")
    out = backend.kernels.marg_cdf(spec.family.code, params.a, params.b, spec.tau, arr)
    return _as_float_result(t, out)


def quantile(spec: MarginalSpec, params: MarginalParams, q):
    """Quantile function; for truncated specs the result lies in [0, tau]."""
    validate_params(spec, params)
    arr = np.asarray(q, dtype=np.float64)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("quantile: q must lie strictly inside (0, 1)")
    out = backend.kernels.marg_ppf(spec.family.code, params.a, params.b, spec.tau, arr)
    return _as_float_result(q, out)


def median(spec: MarginalSpec, params: MarginalParams) -> float:
    return quantile(spec, params, 0.5)
