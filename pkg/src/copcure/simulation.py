"""Data generation from the joint copula model and the Monte Carlo harness.

A scenario fixes the model, the true parameter vector, the sample size and
a base seed.  Replications are seeded independently by mixing the base seed
with the replication index, so parallel and sequential runs aggregate to
identical summaries.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .copulas import CopulaFamily, CopulaSpec, kendall_tau, sample_pair, theta_from_tau
from .cure_model import Dataset, ModelSpec, ParamVector
from .errors import UsageError
from .estimation import FitOptions, FitResult, fit, standard_errors
from .marginals import MarginalParams, MarginalSpec, quantile


def splitmix64(x: int) -> int:
    """64-bit mixing function used to derive per-replication seeds."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


@dataclass(frozen=True)
class Scenario:
    """A data-generating configuration with true parameters."""

    model: ModelSpec
    true_alpha: ParamVector
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise UsageError("scenario sample size must be at least 2")
        self.true_alpha.validate(self.model)

    @property
    def tau_true(self) -> float:
        if self.model.copula is CopulaFamily.INDEPENDENCE:
            return 0.0
        return kendall_tau(CopulaSpec(self.model.copula, self.true_alpha.theta))


def make_scenario(
    copula: str | CopulaFamily,
    latency: MarginalSpec,
    censoring: MarginalSpec,
    latency_params: MarginalParams,
    censoring_params: MarginalParams,
    p: float,
    n: int,
    seed: int = 0,
    theta: float | None = None,
    tau: float | None = None,
    truncate_upper_tail: float | None = None,
) -> Scenario:
    """Assemble a scenario; dependence given as theta or tau (exactly one).

    ``truncate_upper_tail=q`` truncates the latency at the untruncated
    (1-q)-quantile of U under the true parameters.
    """
    family = copula if isinstance(copula, CopulaFamily) else CopulaFamily.parse(copula)
    if family is not CopulaFamily.INDEPENDENCE:
        if (theta is None) == (tau is None):
            raise UsageError("specify exactly one of theta or tau")
        if theta is None:
            theta = theta_from_tau(family, tau)
    elif theta is not None or tau not in (None, 0.0):
        raise UsageError("independence copula carries no dependence parameter")
    else:
        theta = None
    if truncate_upper_tail is not None:
        if not 0.0 < truncate_upper_tail < 1.0:
            raise UsageError("truncate_upper_tail must lie in (0, 1)")
        tau_point = quantile(
            MarginalSpec(latency.family, None), latency_params, 1.0 - truncate_upper_tail
        )
        latency = MarginalSpec(latency.family, truncation=float(tau_point))
    model = ModelSpec(copula=family, latency=latency, censoring=censoring)
    alpha = ParamVector(
        theta=theta, latency_params=latency_params, censoring_params=censoring_params, p=p
    )
    return Scenario(model=model, true_alpha=alpha, n=int(n), seed=int(seed))


@dataclass(frozen=True)
class LatentSample:
    """Latent draws kept alongside a generated dataset for oracle checks."""

    t: np.ndarray  # event time, +inf for the cured
    c: np.ndarray
    u: np.ndarray  # uniform driving T
    v: np.ndarray  # uniform driving C


def generate_dataset(scn: Scenario, return_latent: bool = False):
    """Draw (Y, Delta) records from the joint copula model.

    Construction: (u, v) from the copula, T = inf when u > p else the
    u/p-quantile of U, C the v-quantile of the censoring law; then
    Y = min(T, C), Delta = 1(T <= C).  By construction
    P(T <= t, C <= c) = C(p F_U(t), F_C(c)).
    """
    rng = np.random.default_rng(scn.seed)
    spec = CopulaSpec(scn.model.copula, scn.true_alpha.theta)
    u, v = sample_pair(spec, rng, scn.n)
    p = scn.true_alpha.p
    t = np.full(scn.n, math.inf)
    sus = u <= p
    t[sus] = quantile(
        scn.model.latency,
        scn.true_alpha.latency_params,
        np.clip(u[sus] / p, 1e-15, 1.0 - 1e-15),
    )
    c = quantile(
        scn.model.censoring,
        scn.true_alpha.censoring_params,
        np.clip(v, 1e-15, 1.0 - 1e-15),
    )
    y = np.minimum(t, c)
    delta = (t <= c).astype(np.int64)
    data = Dataset(y, delta)
    if return_latent:
        return data, LatentSample(t=t, c=c, u=u, v=v)
    return data


def censoring_rate(scn: Scenario, n_large: int = 50_000) -> float:
    """Empirical censoring proportion from one large generated sample."""
    if n_large < 10_000:
        raise UsageError("censoring_rate needs n_large >= 10000")
    big = replace(scn, n=int(n_large))
    data = generate_dataset(big)
    return data.n_censored / len(data)


# ---------------------------------------------------------------------------
# Monte Carlo harness
# ---------------------------------------------------------------------------

PARAM_KEYS = ("tau", "p", "theta_u1", "theta_u2", "theta_c1", "theta_c2")


@dataclass(frozen=True)
class ParamStats:
    bias: float
    sd: float
    sd_hat: float
    rmse: float


@dataclass(frozen=True)
class McSummary:
    """Trimmed per-parameter summary of a replication study."""

    params: dict
    n_total: int
    n_converged: int
    n_trimmed: int
    n_retained: int
    censoring_rate_mean: float
    unreliable: bool
    true_values: dict


def _estimates_row(result: FitResult, se_obj) -> tuple:
    a = result.alpha_hat
    tau = 0.0 if result.tau_hat is None else result.tau_hat
    ses = (
        (0.0 if se_obj.tau is None else se_obj.tau, se_obj.p, *se_obj.latency, *se_obj.censoring)
        if se_obj is not None and se_obj.available
        else (math.nan,) * 6
    )
    return (
        tau,
        a.p,
        a.latency_params.a,
        a.latency_params.b,
        a.censoring_params.a,
        a.censoring_params.b,
    ) + ses


def _run_one(args):
    scn_bytes, fit_model, fit_opts, rep = args
    scn = scn_bytes
    rep_seed = splitmix64((scn.seed + rep) & 0xFFFFFFFFFFFFFFFF)
    data = generate_dataset(replace(scn, seed=rep_seed))
    opts = replace(fit_opts, seed=rep_seed)
    result = fit(data, fit_model, opts)
    cens = data.n_censored / len(data)
    if not result.converged:
        return rep, False, cens, None
    se_obj = standard_errors(result, data, opts)
    return rep, True, cens, _estimates_row(result, se_obj)


def summarize_replications(
    rows: np.ndarray,
    converged: np.ndarray,
    true_values: dict,
    reps: int,
    censoring_rates: np.ndarray,
) -> McSummary:
    """Trim by the estimated Kendall's tau and aggregate.

    Non-converged replications are dropped first (and counted); then
    ceil(1% of reps) is removed from each tau tail; bias/SD/RMSE use the
    population (1/n) variance convention so RMSE^2 = bias^2 + SD^2 exactly.
    """
    keep = np.flatnonzero(converged)
    n_conv = keep.size
    k_trim = math.ceil(0.01 * reps)
    order = keep[np.argsort(rows[keep, 0], kind="stable")]
    retained = order[k_trim : n_conv - k_trim] if n_conv > 2 * k_trim else order[:0]

    params = {}
    for j, key in enumerate(PARAM_KEYS):
        est = rows[retained, j]
        se = rows[retained, 6 + j]
        truth = true_values[key]
        if retained.size == 0:
            params[key] = ParamStats(math.nan, math.nan, math.nan, math.nan)
            continue
        bias = float(est.mean() - truth)
        sd = float(est.std(ddof=0))
        rmse = float(np.sqrt(np.mean((est - truth) ** 2)))
        with np.errstate(invalid="ignore"):
            sd_hat = float(np.nanmean(se)) if np.any(np.isfinite(se)) else math.nan
        params[key] = ParamStats(bias=bias, sd=sd, sd_hat=sd_hat, rmse=rmse)

    return McSummary(
        params=params,
        n_total=reps,
        n_converged=n_conv,
        n_trimmed=2 * k_trim if n_conv > 2 * k_trim else n_conv,
        n_retained=retained.size,
        censoring_rate_mean=float(censoring_rates.mean()) if censoring_rates.size else math.nan,
        unreliable=(reps - n_conv) > 0.5 * reps,
        true_values=true_values,
    )


def run_mc(
    scn: Scenario,
    reps: int,
    fit_opts: FitOptions | None = None,
    fit_model: ModelSpec | None = None,
    threads: int = 1,
) -> McSummary:
    """Generate, fit and aggregate ``reps`` replications.

    ``fit_model`` overrides the fitted model (copula misspecification
    studies); the true values for the bias columns always come from the
    generating scenario.
    """
    if reps < 10:
        raise UsageError("run_mc needs at least 10 replications")
    fit_opts = fit_opts or FitOptions()
    fit_model = fit_model or scn.model

    tasks = [(scn, fit_model, fit_opts, r) for r in range(reps)]
    rows = np.full((reps, 12), np.nan)
    converged = np.zeros(reps, dtype=bool)
    cens = np.empty(reps)

    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        results = [_run_one(t) for t in tasks]

    for rep, ok, c, row in results:
        converged[rep] = ok
        cens[rep] = c
        if ok:
            rows[rep] = row

    true_values = {
        "tau": scn.tau_true,
        "p": scn.true_alpha.p,
        "theta_u1": scn.true_alpha.latency_params.a,
        "theta_u2": scn.true_alpha.latency_params.b,
        "theta_c1": scn.true_alpha.censoring_params.a,
        "theta_c2": scn.true_alpha.censoring_params.b,
    }
    return summarize_replications(rows, converged, true_values, reps, cens)
