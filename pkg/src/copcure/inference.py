"""Post-fit model comparison: AIC, likelihood-ratio test against
independence, and a bootstrap confidence interval for the difference in
latency medians between two model specifications."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .copulas import CopulaFamily
from .cure_model import Dataset, ModelSpec
from .errors import UsageError
from .estimation import FitOptions, FitResult, fit
from .marginals import MarginalSpec, median

#: 0.975 normal quantile used for the bootstrap interval.
Z_975 = 1.959964

#: 0.95 quantile of chi-square with one degree of freedom.
CHI2_1_95 = 3.841458820694124


def aic(result: FitResult) -> float:
    """-2 loglik + 2k with k the number of free parameters."""
    if not result.converged:
        raise UsageError("aic requires a converged fit")
    return -2.0 * result.loglik + 2.0 * result.model.n_free_params


@dataclass(frozen=True)
class LrtResult:
    """Likelihood-ratio test of a copula model against independence."""

    lam: float
    df: int
    critical_value_95: float
    reject: bool
    boundary_caveat: bool
    nesting_violation: bool


def lrt_vs_independence(fit_indep: FitResult, fit_copula: FitResult) -> LrtResult:
    """lambda = -2 (loglik_indep - loglik_copula) against chi2(1).

    The chi-square reference ignores that theta may sit on the boundary of
    its domain under the null (Gumbel/Joe at theta = 1); the result carries
    a caveat flag for those families.
    """
    if fit_indep.model.copula is not CopulaFamily.INDEPENDENCE:
        raise UsageError("first argument must be the independence-copula fit")
    if fit_copula.model.copula is CopulaFamily.INDEPENDENCE:
        raise UsageError("second argument must be a copula-model fit")
    if fit_indep.data_fingerprint != fit_copula.data_fingerprint:
        raise UsageError("fits were not computed on the same dataset")
    if (
        fit_indep.model.latency != fit_copula.model.latency
        or fit_indep.model.censoring != fit_copula.model.censoring
    ):
        raise UsageError("fits must share the same marginal specifications")

    lam = 2.0 * (fit_copula.loglik - fit_indep.loglik)
    violation = lam < -1e-6
    if -1e-6 <= lam < 0.0:
        lam = 0.0
    return LrtResult(
        lam=lam,
        df=1,
        critical_value_95=CHI2_1_95,
        reject=lam > CHI2_1_95,
        boundary_caveat=fit_copula.model.copula in (CopulaFamily.GUMBEL, CopulaFamily.JOE),
        nesting_violation=violation,
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Median-difference bootstrap: Med_U(model A) - Med_U(model B)."""

    diff: float
    sd_hat: float
    ci_low: float
    ci_high: float
    n_boot: int
    n_failed: int
    diffs: np.ndarray
    unreliable: bool


def _fitted_median(result: FitResult) -> float:
    return median(result.model.latency, result.alpha_hat.latency_params)


def _respec_truncation(spec_model: ModelSpec, data: Dataset) -> ModelSpec:
    """Re-resolve a truncated latency to the sample's last uncensored time."""
    if spec_model.latency.truncation is None:
        return spec_model
    lat = MarginalSpec(spec_model.latency.family, truncation=data.largest_uncensored())
    return ModelSpec(spec_model.copula, lat, spec_model.censoring)


def bootstrap_median_diff(
    data: Dataset,
    spec_a: ModelSpec,
    spec_b: ModelSpec,
    n_boot: int,
    seed: int = 0,
    fit_opts: FitOptions | None = None,
    recompute_truncation: bool = True,
) -> BootstrapResult:
    """Nonparametric bootstrap of the latency-median difference.

    The point estimate is computed on the original sample; each bootstrap
    resample (with replacement) is refit under both specifications and the
    interval is diff +/- z_0.975 * SD(bootstrap diffs).  When
    ``recompute_truncation`` is set, latency truncation points are
    re-resolved to each resample's last uncensored observation.
    """
    if n_boot < 100:
        raise UsageError("bootstrap_median_diff needs n_boot >= 100")
    fit_opts = fit_opts or FitOptions()

    fit_a = fit(data, spec_a, fit_opts)
    fit_b = fit(data, spec_b, fit_opts)
    if not (fit_a.converged and fit_b.converged):
        raise UsageError("baseline fits did not converge; cannot bootstrap")
    diff = _fitted_median(fit_a) - _fitted_median(fit_b)

    rng = np.random.default_rng(seed)
    n = len(data)
    diffs = []
    n_failed = 0
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        sample = Dataset(data.y[idx], data.delta[idx])
        try:
            sample.validate_for_fit()
            ma = _respec_truncation(spec_a, sample) if recompute_truncation else spec_a
            mb = _respec_truncation(spec_b, sample) if recompute_truncation else spec_b
            sample.validate_for_model(ma)
            sample.validate_for_model(mb)
            ra = fit(sample, ma, replace(fit_opts, seed=seed + b + 1))
            rb = fit(sample, mb, replace(fit_opts, seed=seed + b + 1))
        except Exception:
            n_failed += 1
            continue
        if not (ra.converged and rb.converged):
            n_failed += 1
            continue
        diffs.append(_fitted_median(ra) - _fitted_median(rb))

    diffs = np.asarray(diffs)
    sd_hat = float(diffs.std(ddof=1)) if diffs.size > 1 else math.nan
    return BootstrapResult(
        diff=diff,
        sd_hat=sd_hat,
        ci_low=diff - Z_975 * sd_hat,
        ci_high=diff + Z_975 * sd_hat,
        n_boot=n_boot,
        n_failed=n_failed,
        diffs=diffs,
        unreliable=n_failed > 0.2 * n_boot,
    )
