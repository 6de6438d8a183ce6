"""Parametric mixture cure models under copula-dependent censoring.

Fits the improper-survival mixture model where the event time T equals a
susceptible lifetime U with probability p (and +inf otherwise) and the
censoring time C may depend on T through a parametric copula with unknown
association.  Provides maximum-likelihood estimation with inverse-Fisher
standard errors, synthetic data generation, a trimmed Monte Carlo harness,
and AIC / likelihood-ratio / bootstrap model comparison.

Numeric kernels run through numba by default; set ``COPCURE_BACKEND=numpy``
for the pure-numpy fallback.
"""

from . import backend
from .copulas import (
    CopulaFamily,
    CopulaSpec,
    check_identifiability_limits,
    copula_cdf,
    copula_density,
    h_c_given_t,
    h_inverse_c_given_t,
    h_t_given_c,
    kendall_tau,
    kendall_tau_integral,
    sample_pair,
    theta_from_tau,
)
from .cure_model import Dataset, ModelSpec, ParamVector, loglik, obs_density, survival_T
from .errors import (
    CopcureError,
    DataError,
    DomainError,
    NumericalError,
    ParameterError,
    UsageError,
)
from .estimation import (
    FitOptions,
    FitResult,
    StdErrors,
    fit,
    fit_with_se,
    standard_errors,
    starting_values,
)
from .inference import (
    BootstrapResult,
    LrtResult,
    aic,
    bootstrap_median_diff,
    lrt_vs_independence,
)
from .marginals import MarginalFamily, MarginalParams, MarginalSpec, cdf, median, pdf, quantile
from .simulation import (
    McSummary,
    Scenario,
    censoring_rate,
    generate_dataset,
    make_scenario,
    run_mc,
)

__version__ = "0.1.0"
