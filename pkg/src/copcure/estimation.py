"""Multi-start maximum-likelihood fitting with inverse-Fisher standard errors.

The optimizer is a Nelder-Mead simplex search run in an unconstrained
transformed space (log for positive parameters, logit for the incidence,
a family-specific bijection for the association parameter) from every
starting vector produced by the pilot recipe: Weibull maximum likelihood
on the uncensored (latency) and censored (censoring) observations,
nine multiplicative perturbations, an incidence guess from the largest
uncensored time, and a grid of Kendall's-tau starting values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import backend
from .copulas import CopulaFamily, CopulaSpec, kendall_tau, theta_from_tau
from .cure_model import Dataset, ModelSpec, ParamVector
from .errors import UsageError
from .marginals import MarginalFamily, MarginalParams

_LOGLOGISTIC_SHAPE_FACTOR = 2.0 * math.log(3.0) / math.log(math.log(4.0) / math.log(4.0 / 3.0))


@dataclass(frozen=True)
class FitOptions:
    """Knobs for the multi-start search; defaults follow the pilot recipe."""

    tau_grid: tuple[float, ...] | None = None
    n_perturbations: int = 9
    seed: int = 0
    f_tol: float = 1e-8
    x_tol: float = 1e-6
    max_iter: int = 5000
    hessian_rel_step: float = 1e-4
    hessian_abs_step: float = 1e-5
    max_floored: int = 0

    def __post_init__(self):
        if self.n_perturbations < 0:
            raise UsageError("n_perturbations must be >= 0")


@dataclass(frozen=True)
class StdErrors:
    """Inverse-Fisher standard errors; unavailable when the observed
    information is not positive definite."""

    available: bool
    theta: float | None = None
    tau: float | None = None
    latency: tuple[float, float] | None = None
    censoring: tuple[float, float] | None = None
    p: float | None = None
    min_eigenvalue: float | None = None


@dataclass(frozen=True)
class FitResult:
    alpha_hat: ParamVector | None
    tau_hat: float | None
    loglik: float
    converged: bool
    n_starts: int
    n_converged: int
    best_start_index: int
    underflow_count: int
    model: ModelSpec
    data_fingerprint: tuple[int, str]
    se: StdErrors | None = None
    message: str = ""


# ---------------------------------------------------------------------------
# parameter transforms
# ---------------------------------------------------------------------------

def _theta_to_x(family: CopulaFamily, theta: float) -> float:
    if family is CopulaFamily.FRANK:
        return theta
    if family in (CopulaFamily.GUMBEL, CopulaFamily.JOE):
        return math.log(theta - 1.0)
    if family is CopulaFamily.GAUSSIAN:
        return math.atanh(theta)
    return math.log(theta)  # Clayton rotations


def _theta_from_x(family: CopulaFamily, x: float) -> float:
    if family is CopulaFamily.FRANK:
        return x
    if family in (CopulaFamily.GUMBEL, CopulaFamily.JOE):
        return 1.0 + math.exp(x)
    if family is CopulaFamily.GAUSSIAN:
        return math.tanh(x)
    return math.exp(x)


def _marg_to_x(family: MarginalFamily, params: MarginalParams) -> tuple[float, float]:
    if family is MarginalFamily.LOGNORMAL:
        return math.log(params.a), params.b  # mu unrestricted
    return math.log(params.a), math.log(params.b)


def _marg_from_x(family: MarginalFamily, xa: float, xb: float) -> tuple[float, float]:
    if family is MarginalFamily.LOGNORMAL:
        return math.exp(xa), xb
    return math.exp(xa), math.exp(xb)


def to_unconstrained(alpha: ParamVector, model: ModelSpec) -> np.ndarray:
    x = []
    if model.copula is not CopulaFamily.INDEPENDENCE:
        x.append(_theta_to_x(model.copula, alpha.theta))
    x.extend(_marg_to_x(model.latency.family, alpha.latency_params))
    x.extend(_marg_to_x(model.censoring.family, alpha.censoring_params))
    p = alpha.p
    x.append(math.log(p / (1.0 - p)))
    return np.asarray(x, dtype=np.float64)


def from_unconstrained(x: np.ndarray, model: ModelSpec) -> ParamVector:
    i = 0
    theta = None
    if model.copula is not CopulaFamily.INDEPENDENCE:
        theta = _theta_from_x(model.copula, float(x[0]))
        i = 1
    la, lb = _marg_from_x(model.latency.family, float(x[i]), float(x[i + 1]))
    ca, cb = _marg_from_x(model.censoring.family, float(x[i + 2]), float(x[i + 3]))
    p = 1.0 / (1.0 + math.exp(-float(x[i + 4])))
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return ParamVector(
        theta=theta,
        latency_params=MarginalParams(la, lb),
        censoring_params=MarginalParams(ca, cb),
        p=p,
    )


def _natural_vector(alpha: ParamVector, model: ModelSpec) -> np.ndarray:
    x = [] if model.copula is CopulaFamily.INDEPENDENCE else [alpha.theta]
    x += [alpha.latency_params.a, alpha.latency_params.b,
          alpha.censoring_params.a, alpha.censoring_params.b, alpha.p]
    return np.asarray(x, dtype=np.float64)


def _alpha_from_natural(x: np.ndarray, model: ModelSpec) -> ParamVector:
    i = 0 if model.copula is CopulaFamily.INDEPENDENCE else 1
    return ParamVector(
        theta=None if i == 0 else float(x[0]),
        latency_params=MarginalParams(float(x[i]), float(x[i + 1])),
        censoring_params=MarginalParams(float(x[i + 2]), float(x[i + 3])),
        p=float(x[i + 4]),
    )


# ---------------------------------------------------------------------------
# pilot estimates and starting values
# ---------------------------------------------------------------------------

def weibull_mle(y: np.ndarray) -> tuple[float, float]:
    """Maximum likelihood (scale, shape) for a complete Weibull sample."""
    y = np.asarray(y, dtype=np.float64)
    logy = np.log(y)
    mean_logy = logy.mean()

    def g(k):
        yk = np.exp(k * logy)
        return float((yk * logy).sum() / yk.sum() - 1.0 / k - mean_logy)

    lo, hi = 1e-2, 1.0
    while g(hi) < 0.0 and hi < 100.0:
        lo = hi
        hi *= 2.0
    if g(hi) < 0.0:
        k = hi  # nearly constant sample; cap the shape
    elif g(lo) > 0.0:
        k = lo
    else:
        k = scipy.optimize.brentq(g, lo, hi, xtol=1e-10)
    scale = float(np.exp(k * logy).mean() ** (1.0 / k))
    return scale, k


def _weibull_moments(scale: float, shape: float) -> tuple[float, float]:
    m = scale * math.gamma(1.0 + 1.0 / shape)
    m2 = scale * scale * math.gamma(1.0 + 2.0 / shape)
    return m, max(m2 - m * m, 1e-12 * m * m)


def convert_pilot(family: MarginalFamily, scale: float, shape: float) -> MarginalParams:
    """Map a Weibull pilot into the target family.

    Log-normal and Gamma are matched on mean and variance; the log-logistic
    is matched on the median and the interquartile ratio (its mean need not
    exist for shape <= 1).
    """
    if family is MarginalFamily.WEIBULL:
        return MarginalParams(scale, shape)
    if family is MarginalFamily.LOGLOGISTIC:
        med = scale * math.log(2.0) ** (1.0 / shape)
        return MarginalParams(med, _LOGLOGISTIC_SHAPE_FACTOR * shape)
    m, v = _weibull_moments(scale, shape)
    if family is MarginalFamily.LOGNORMAL:
        s2 = math.log1p(v / (m * m))
        return MarginalParams(math.sqrt(s2), math.log(m) - 0.5 * s2)
    # gamma: shape, scale
    return MarginalParams(m * m / v, v / m)


def default_tau_grid(family: CopulaFamily) -> tuple[float, ...]:
    pos = tuple(round(0.1 * k, 1) for k in range(1, 10))
    neg = tuple(-t for t in pos)
    if family is CopulaFamily.INDEPENDENCE:
        return ()
    if family in (CopulaFamily.FRANK, CopulaFamily.GAUSSIAN):
        return pos + neg
    if family in (CopulaFamily.CLAYTON90, CopulaFamily.CLAYTON270):
        return neg
    return pos


def starting_values(data: Dataset, model: ModelSpec, opts: FitOptions) -> list[ParamVector]:
    """Cross product of the tau grid with the base and perturbed pilots."""
    data.validate_for_fit()
    rng = np.random.default_rng(opts.seed)
    mult = rng.uniform(0.5, 1.5, opts.n_perturbations)

    y_unc = data.y[data.delta == 1]
    y_cen = data.y[data.delta == 0]
    lat_scale, lat_shape = weibull_mle(y_unc)
    cen_scale, cen_shape = weibull_mle(y_cen)
    p0 = float(np.mean(data.y <= data.largest_uncensored()))
    p0 = min(max(p0, 1e-3), 1.0 - 1e-3)

    pilots = [(1.0, p0)] + [(float(m), p0 ** float(m)) for m in mult]
    param_sets = []
    for m, p in pilots:
        lat = convert_pilot(model.latency.family, lat_scale * m, lat_shape * m)
        cen = convert_pilot(model.censoring.family, cen_scale * m, cen_shape * m)
        param_sets.append((lat, cen, min(max(p, 1e-3), 1.0 - 1e-3)))

    grid = opts.tau_grid if opts.tau_grid is not None else default_tau_grid(model.copula)
    if model.copula is CopulaFamily.INDEPENDENCE:
        return [
            ParamVector(None, lat, cen, p) for lat, cen, p in param_sets
        ]
    starts = []
    for tau in grid:
        theta = theta_from_tau(model.copula, tau)
        for lat, cen, p in param_sets:
            starts.append(ParamVector(theta, lat, cen, p))
    return starts


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _make_objective(data: Dataset, model: ModelSpec):
    """Negative log-likelihood over the unconstrained vector.

    Floored terms stay in the sum (each is penalized at log 1e-300), which
    keeps the simplex search alive through underflow regions instead of
    flat-lining it on infinities; a large finite ceiling covers invalid
    parameter values.
    """
    K = backend.kernels
    cop = model.copula.code
    is_indep = model.copula is CopulaFamily.INDEPENDENCE
    family = model.copula
    lfam = model.latency.family
    cfam = model.censoring.family
    lcode, ccode = lfam.code, cfam.code
    ltau = model.latency.tau
    y, delta = data.y, data.delta
    lat_lognormal = lfam is MarginalFamily.LOGNORMAL
    cen_lognormal = cfam is MarginalFamily.LOGNORMAL
    ceiling = 800.0 * len(data)  # worse than every term floored

    def negloglik(x):
        i = 0
        theta = 0.0
        if not is_indep:
            theta = _theta_from_x(family, float(x[0]))
            i = 1
        la = math.exp(x[i])
        lb = x[i + 1] if lat_lognormal else math.exp(x[i + 1])
        ca = math.exp(x[i + 2])
        cb = x[i + 3] if cen_lognormal else math.exp(x[i + 3])
        xp = x[i + 4]
        p = 1.0 / (1.0 + math.exp(-xp)) if xp < 36.0 else 1.0 - 1e-12
        p = max(p, 1e-12)
        if not all(map(math.isfinite, (theta, la, lb, ca, cb))):
            return ceiling
        terms, _ = K.loglik_terms(
            cop, theta, lcode, la, lb, ltau, ccode, ca, cb, p, y, delta
        )
        val = float(np.sum(terms))
        return -val if math.isfinite(val) else ceiling

    return negloglik


def _optimize_starts(data, model, x0s, opts):
    """Minimize the negative log-likelihood from each start; returns
    (funs, xs, converged_flags)."""
    K = backend.kernels
    if hasattr(K, "nm_multistart"):
        return K.nm_multistart(
            model.copula.code,
            model.latency.family.code,
            model.censoring.family.code,
            model.latency.tau,
            x0s,
            data.y,
            data.delta,
            opts.x_tol,
            opts.f_tol,
            opts.max_iter,
        )
    objective = _make_objective(data, model)
    xs = np.empty_like(x0s)
    funs = np.empty(x0s.shape[0])
    conv = np.zeros(x0s.shape[0], dtype=bool)
    for i in range(x0s.shape[0]):
        res = scipy.optimize.minimize(
            objective,
            x0s[i],
            method="Nelder-Mead",
            options={
                "xatol": opts.x_tol,
                "fatol": opts.f_tol,
                "maxiter": opts.max_iter,
                "maxfev": 10 * opts.max_iter,
            },
        )
        xs[i] = res.x
        funs[i] = res.fun
        conv[i] = bool(res.success)
    return xs, funs, conv


def fit(data: Dataset, model: ModelSpec, opts: FitOptions | None = None) -> FitResult:
    """Maximize the log-likelihood from every starting vector; best converged
    optimum wins, ties broken by the lower start index."""
    opts = opts or FitOptions()
    data.validate_for_fit()
    data.validate_for_model(model)
    starts = starting_values(data, model, opts)
    x0s = np.asarray([to_unconstrained(s, model) for s in starts])
    xs, funs, conv = _optimize_starts(data, model, x0s, opts)

    n_converged = int(np.count_nonzero(conv & np.isfinite(funs)))
    fingerprint = data.fingerprint()
    from .cure_model import loglik_terms as _terms

    if n_converged == 0:
        order = np.argsort(funs)
        best = int(order[0]) if len(order) else -1
        return FitResult(
            alpha_hat=from_unconstrained(xs[best], model) if best >= 0 else None,
            tau_hat=None,
            loglik=-float(funs[best]) if best >= 0 else -math.inf,
            converged=False,
            n_starts=len(starts),
            n_converged=0,
            best_start_index=best,
            underflow_count=0,
            model=model,
            data_fingerprint=fingerprint,
            message="no start converged within the iteration cap",
        )

    candidates = sorted(
        (float(funs[i]), i) for i in range(len(starts)) if conv[i] and math.isfinite(funs[i])
    )
    _, idx = candidates[0]
    alpha_hat = from_unconstrained(xs[idx], model)
    terms, underflow = _terms(alpha_hat, model, data)
    tau_hat = None
    if model.copula is not CopulaFamily.INDEPENDENCE:
        tau_hat = kendall_tau(CopulaSpec(model.copula, alpha_hat.theta))
    return FitResult(
        alpha_hat=alpha_hat,
        tau_hat=tau_hat,
        loglik=float(np.sum(terms)),
        converged=True,
        n_starts=len(starts),
        n_converged=n_converged,
        best_start_index=idx,
        underflow_count=underflow,
        model=model,
        data_fingerprint=fingerprint,
        se=None,
    )


# ---------------------------------------------------------------------------
# standard errors
# ---------------------------------------------------------------------------

def _loglik_natural(x: np.ndarray, model: ModelSpec, data: Dataset) -> float:
    K = backend.kernels
    i = 0 if model.copula is CopulaFamily.INDEPENDENCE else 1
    theta = 0.0 if i == 0 else float(x[0])
    terms, _ = K.loglik_terms(
        model.copula.code,
        theta,
        model.latency.family.code,
        float(x[i]),
        float(x[i + 1]),
        model.latency.tau,
        model.censoring.family.code,
        float(x[i + 2]),
        float(x[i + 3]),
        float(x[i + 4]),
        data.y,
        data.delta,
    )
    return float(np.sum(terms))


def _hessian(f, x0: np.ndarray, rel_step: float, abs_step: float) -> np.ndarray:
    n = x0.size
    h = np.maximum(rel_step * np.abs(x0), abs_step)
    H = np.empty((n, n))
    f0 = f(x0)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x0 + ei) - 2.0 * f0 + f(x0 - ei)) / (h[i] * h[i])
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def _dtau_dtheta(family: CopulaFamily, theta: float, rel_step: float, abs_step: float) -> float:
    h = max(rel_step * abs(theta), abs_step)
    # keep the stencil inside the family domain
    if family in (CopulaFamily.GUMBEL, CopulaFamily.JOE):
        h = min(h, 0.5 * (theta - 1.0)) if theta > 1.0 else abs_step
    elif family in (CopulaFamily.CLAYTON90, CopulaFamily.CLAYTON180, CopulaFamily.CLAYTON270):
        h = min(h, 0.5 * theta)
    elif family is CopulaFamily.GAUSSIAN:
        h = min(h, 0.5 * (1.0 - abs(theta)))
    if h <= 0.0:
        return math.nan
    tp = kendall_tau(CopulaSpec(family, theta + h))
    tm = kendall_tau(CopulaSpec(family, theta - h))
    return (tp - tm) / (2.0 * h)


def standard_errors(result: FitResult, data: Dataset, opts: FitOptions | None = None) -> StdErrors:
    """Observed-information standard errors at the fitted optimum.

    The Hessian of the log-likelihood is taken in natural parameter space
    by central differences; a non-positive-definite information matrix is
    reported as unavailable together with its smallest eigenvalue.
    """
    opts = opts or FitOptions()
    if result.alpha_hat is None:
        return StdErrors(available=False)
    model = result.model
    x0 = _natural_vector(result.alpha_hat, model)
    H = _hessian(
        lambda x: _loglik_natural(x, model, data),
        x0,
        opts.hessian_rel_step,
        opts.hessian_abs_step,
    )
    info = -H
    eigvals = np.linalg.eigvalsh(info)
    if not np.all(np.isfinite(info)) or eigvals[0] <= 0.0:
        return StdErrors(available=False, min_eigenvalue=float(eigvals[0]))
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    has_theta = model.copula is not CopulaFamily.INDEPENDENCE
    i = 1 if has_theta else 0
    se_theta = float(se[0]) if has_theta else None
    se_tau = None
    if has_theta:
        d = _dtau_dtheta(
            model.copula, result.alpha_hat.theta, opts.hessian_rel_step, opts.hessian_abs_step
        )
        if math.isfinite(d):
            se_tau = abs(d) * se_theta
    return StdErrors(
        available=True,
        theta=se_theta,
        tau=se_tau,
        latency=(float(se[i]), float(se[i + 1])),
        censoring=(float(se[i + 2]), float(se[i + 3])),
        p=float(se[i + 4]),
        min_eigenvalue=float(eigvals[0]),
    )


def fit_with_se(data: Dataset, model: ModelSpec, opts: FitOptions | None = None) -> FitResult:
    """Convenience wrapper: fit, then attach standard errors."""
    result = fit(data, model, opts)
    if result.converged:
        result = replace(result, se=standard_errors(result, data, opts))
    return result
