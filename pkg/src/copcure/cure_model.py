"""The improper-survival mixture cure model under copula-dependent censoring.

The latent event time T equals the susceptible lifetime U with probability
p and +inf otherwise, so F_T(t) = p F_U(t) is improper.  The censoring time
C is proper with support [0, inf).  Only Y = min(T, C) and the indicator
Delta = 1(T <= C) are observed; their joint sub-densities involve the
copula h-functions evaluated at (p F_U(y), F_C(y)).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .backend.codes import DENSITY_FLOOR
from .copulas import CopulaFamily, validate_theta
from .errors import DataError, DomainError, ParameterError, UsageError
from .marginals import MarginalParams, MarginalSpec, validate_params


@dataclass(frozen=True)
class ModelSpec:
    """Copula family plus latency and censoring marginal specs."""

    copula: CopulaFamily
    latency: MarginalSpec
    censoring: MarginalSpec

    def __post_init__(self):
        if not isinstance(self.copula, CopulaFamily):
            object.__setattr__(self, "copula", CopulaFamily.parse(self.copula))
        if self.censoring.truncation is not None:
            raise ParameterError("censoring distribution must have support [0, inf)")

    @property
    def n_free_params(self) -> int:
        """2 + 2 + incidence, plus theta unless independence."""
        return 5 if self.copula is CopulaFamily.INDEPENDENCE else 6


@dataclass(frozen=True)
class ParamVector:
    """Full parameter vector (theta, theta_U, theta_C, p)."""

    theta: float | None
    latency_params: MarginalParams
    censoring_params: MarginalParams
    p: float

    def validate(self, model: ModelSpec) -> None:
        validate_theta(model.copula, self.theta)
        validate_params(model.latency, self.latency_params)
        validate_params(model.censoring, self.censoring_params)
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"incidence p must lie in (0, 1), got {self.p}")


class Dataset:
    """Observed right-censored sample: times y > 0 and event indicators."""

    def __init__(self, y, delta):
        y = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
        delta = np.asarray(delta)
        if y.ndim != 1 or delta.shape != y.shape:
            raise DataError("y and delta must be one-dimensional and equally long")
        if y.size == 0:
            raise DataError("dataset is empty")
        if not np.all(np.isfinite(y)) or np.any(y <= 0.0):
            raise DataError("all observed times must be finite and > 0")
        uniq = np.unique(delta)
        if not np.all(np.isin(uniq, (0, 1))):
            raise DataError("delta entries must be 0 (censored) or 1 (event)")
        self.y = y
        self.delta = np.ascontiguousarray(delta.astype(np.int64))

    def __len__(self) -> int:
        return self.y.size

    @property
    def n_events(self) -> int:
        return int(self.delta.sum())

    @property
    def n_censored(self) -> int:
        return len(self) - self.n_events

    def largest_uncensored(self) -> float:
        if self.n_events == 0:
            raise UsageError("dataset has no uncensored observations")
        return float(self.y[self.delta == 1].max())

    def validate_for_fit(self) -> None:
        if self.n_events == 0 or self.n_censored == 0:
            raise UsageError(
                "fitting requires at least one censored and one uncensored record"
            )

    def validate_for_model(self, model: ModelSpec) -> None:
        tau = model.latency.truncation
        if tau is not None and np.any((self.delta == 1) & (self.y > tau)):
            raise DataError(
                f"uncensored observation beyond the latency truncation point {tau} "
                "is impossible under the model"
            )

    def fingerprint(self) -> tuple[int, str]:
        """(record count, content checksum) for cross-report identity checks."""
        h = hashlib.sha256()
        h.update(self.y.tobytes())
        h.update(self.delta.tobytes())
        return len(self), h.hexdigest()[:16]

    def scaled(self, c: float) -> "Dataset":
        """Times divided by c (unit conversion, e.g. days -> months)."""
        if c <= 0.0:
            raise UsageError("scale factor must be > 0")
        return Dataset(self.y / c, self.delta)


def survival_T(alpha: ParamVector, model: ModelSpec, t):
    """Improper survival function S_T(t) = 1 - p + p S_U(t)."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("survival_T: t must be >= 0")
    Fu = backend.kernels.marg_cdf(
        model.latency.family.code,
        alpha.latency_params.a,
        alpha.latency_params.b,
        model.latency.tau,
        arr,
    )
    out = 1.0 - alpha.p * Fu
    if np.isscalar(t) or getattr(t, "ndim", None) == 0:
        return float(out)
    return out


def obs_density(alpha: ParamVector, model: ModelSpec, y, delta):
    """Sub-density f_{Y,Delta}(y, delta) of the observed pair.

    Underflowing or non-positive bracket values are floored at 1e-300.
    """
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("obs_density: y must be > 0")
    d = np.asarray(delta, dtype=np.int64)
    terms, _ = backend.kernels.loglik_terms(
        model.copula.code,
        0.0 if alpha.theta is None else alpha.theta,
        model.latency.family.code,
        alpha.latency_params.a,
        alpha.latency_params.b,
        model.latency.tau,
        model.censoring.family.code,
        alpha.censoring_params.a,
        alpha.censoring_params.b,
        alpha.p,
        np.atleast_1d(arr),
        np.atleast_1d(d),
    )
    out = np.maximum(np.exp(terms), DENSITY_FLOOR).reshape(arr.shape)
    if np.isscalar(y) or arr.ndim == 0:
        return float(out)
    return out


def loglik_terms(alpha: ParamVector, model: ModelSpec, data: Dataset):
    """Per-record log-density terms plus the count of floored terms."""
    return backend.kernels.loglik_terms(
        model.copula.code,
        0.0 if alpha.theta is None else alpha.theta,
        model.latency.family.code,
        alpha.latency_params.a,
        alpha.latency_params.b,
        model.latency.tau,
        model.censoring.family.code,
        alpha.censoring_params.a,
        alpha.censoring_params.b,
        alpha.p,
        data.y,
        data.delta,
    )


def loglik(alpha: ParamVector, model: ModelSpec, data: Dataset, max_floored: int = 0):
    """Log-likelihood sum; -inf when more than ``max_floored`` terms floored."""
    if len(data) == 0:
        raise UsageError("loglik: empty dataset")
    terms, n_floored = loglik_terms(alpha, model, data)
    if n_floored > max_floored:
        return -math.inf
    return float(np.sum(terms))
