import math

import numpy as np
import pytest

from copcure.copulas import CopulaFamily
from copcure.cure_model import Dataset, ModelSpec
from copcure.errors import UsageError
from copcure.estimation import FitOptions, FitResult
from copcure.inference import (
    CHI2_1_95,
    Z_975,
    aic,
    bootstrap_median_diff,
    lrt_vs_independence,
)
from copcure.marginals import MarginalFamily, MarginalParams, MarginalSpec
from copcure.simulation import generate_dataset, make_scenario

W = MarginalSpec(MarginalFamily.WEIBULL)
LN = MarginalSpec(MarginalFamily.LOGNORMAL)


def synthetic_fit(loglik, copula=CopulaFamily.INDEPENDENCE, latency=W, fingerprint=(286, "abc")):
    model = ModelSpec(copula, latency, W)
    return FitResult(
        alpha_hat=None,
        tau_hat=None,
        loglik=loglik,
        converged=True,
        n_starts=1,
        n_converged=1,
        best_start_index=0,
        underflow_count=0,
        model=model,
        data_fingerprint=fingerprint,
    )


class TestAic:
    def test_veridex_independence_weibull_row(self):
        # -loglik 1477.6 with k = 5
        assert aic(synthetic_fit(-1477.6)) == pytest.approx(2965.1, abs=0.2)

    def test_veridex_joe_lognormal_row(self):
        fit = synthetic_fit(-1469.5, copula=CopulaFamily.JOE, latency=LN)
        assert aic(fit) == pytest.approx(2950.9, abs=0.2)

    def test_increases_in_k_at_fixed_loglik(self):
        indep = synthetic_fit(-1000.0)
        joe = synthetic_fit(-1000.0, copula=CopulaFamily.JOE)
        assert aic(joe) == aic(indep) + 2.0

    def test_requires_convergence(self):
        bad = synthetic_fit(-1.0)
        object.__setattr__(bad, "converged", False)
        with pytest.raises(UsageError):
            aic(bad)


class TestLrt:
    def test_veridex_statistic(self):
        indep = synthetic_fit(-1474.1)
        joe = synthetic_fit(-1469.5, copula=CopulaFamily.JOE)
        res = lrt_vs_independence(indep, joe)
        assert res.lam == pytest.approx(9.2, abs=1e-9)
        assert res.df == 1
        assert res.critical_value_95 == pytest.approx(3.841458820694124, abs=1e-12)
        assert res.reject
        assert res.boundary_caveat  # Joe nests independence on the theta=1 boundary

    def test_identical_logliks(self):
        indep = synthetic_fit(-100.0)
        frank = synthetic_fit(-100.0, copula=CopulaFamily.FRANK)
        res = lrt_vs_independence(indep, frank)
        assert res.lam == 0.0
        assert not res.reject
        assert not res.boundary_caveat

    def test_small_negative_clamped(self):
        indep = synthetic_fit(-100.0)
        frank = synthetic_fit(-100.0 - 1e-8, copula=CopulaFamily.FRANK)
        res = lrt_vs_independence(indep, frank)
        assert res.lam == 0.0
        assert not res.nesting_violation

    def test_nesting_violation_flagged(self):
        indep = synthetic_fit(-100.0)
        frank = synthetic_fit(-100.5, copula=CopulaFamily.FRANK)
        res = lrt_vs_independence(indep, frank)
        assert res.nesting_violation

    def test_mismatched_fingerprints(self):
        indep = synthetic_fit(-100.0, fingerprint=(10, "aaa"))
        frank = synthetic_fit(-99.0, copula=CopulaFamily.FRANK, fingerprint=(10, "bbb"))
        with pytest.raises(UsageError):
            lrt_vs_independence(indep, frank)

    def test_mismatched_margins(self):
        indep = synthetic_fit(-100.0, latency=W)
        frank = synthetic_fit(-99.0, copula=CopulaFamily.FRANK, latency=LN)
        with pytest.raises(UsageError):
            lrt_vs_independence(indep, frank)

    def test_argument_order(self):
        indep = synthetic_fit(-100.0)
        frank = synthetic_fit(-99.0, copula=CopulaFamily.FRANK)
        with pytest.raises(UsageError):
            lrt_vs_independence(frank, indep)

    def test_chi2_quantile_constant(self):
        import scipy.stats

        assert CHI2_1_95 == pytest.approx(scipy.stats.chi2.ppf(0.95, 1), abs=1e-12)


class TestBootstrap:
    FAST = FitOptions(tau_grid=(0.4,), n_perturbations=1, seed=0)

    @pytest.fixture(scope="class")
    def data(self):
        scn = make_scenario(
            "frank",
            W,
            W,
            MarginalParams(0.5, 1.0),
            MarginalParams(1.0, 1.0),
            p=0.8,
            n=90,
            seed=17,
            tau=0.5,
        )
        return generate_dataset(scn)

    def test_minimum_boot_count(self, data):
        with pytest.raises(UsageError):
            bootstrap_median_diff(
                data, ModelSpec(CopulaFamily.INDEPENDENCE, W, W),
                ModelSpec(CopulaFamily.FRANK, W, W), n_boot=50, fit_opts=self.FAST
            )

    @pytest.fixture(scope="class")
    def same_spec_result(self, data):
        spec = ModelSpec(CopulaFamily.FRANK, W, W)
        return bootstrap_median_diff(
            data, spec, spec, n_boot=100, seed=5, fit_opts=self.FAST
        )

    def test_identical_specs_give_zero_diff(self, same_spec_result):
        res = same_spec_result
        assert res.diff == 0.0
        assert res.sd_hat == 0.0
        assert res.ci_low == res.ci_high == 0.0

    def test_ci_width_formula(self, same_spec_result):
        res = same_spec_result
        assert res.ci_high - res.ci_low == 2.0 * Z_975 * res.sd_hat
        assert res.ci_low == res.diff - Z_975 * res.sd_hat
        assert res.ci_high == res.diff + Z_975 * res.sd_hat

    def test_sd_is_sample_sd_of_diffs(self, same_spec_result):
        res = same_spec_result
        assert res.sd_hat == float(np.asarray(res.diffs).std(ddof=1))

    def test_z_constant_pinned(self):
        assert Z_975 == 1.959964
