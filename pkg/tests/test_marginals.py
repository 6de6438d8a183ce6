import math

import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from copcure.errors import DomainError, ParameterError
from copcure.marginals import (
    MarginalFamily,
    MarginalParams,
    MarginalSpec,
    cdf,
    median,
    pdf,
    quantile,
)

# family -> a few valid parameter sets (a, b) in the public order
CASES = {
    MarginalFamily.WEIBULL: [(1.0, 1.0), (0.5, 1.0), (2.0, 3.1), (1.3, 0.7)],
    MarginalFamily.LOGNORMAL: [(1.0, 0.0), (0.6, -0.4), (0.4, 1.2)],
    MarginalFamily.LOGLOGISTIC: [(1.0, 2.0), (0.8, 1.3), (2.5, 4.0)],
    MarginalFamily.GAMMA: [(1.0, 1.0), (2.3, 0.7), (0.8, 1.5)],
}


def scipy_frozen(family, a, b):
    """Independent reference distribution for cross-checks."""
    if family is MarginalFamily.WEIBULL:
        return scipy.stats.weibull_min(b, scale=a)
    if family is MarginalFamily.LOGNORMAL:
        return scipy.stats.lognorm(a, scale=math.exp(b))
    if family is MarginalFamily.LOGLOGISTIC:
        return scipy.stats.fisk(b, scale=a)
    return scipy.stats.gamma(a, scale=b)


class TestExamples:
    def test_exponential_density_at_zero(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.WEIBULL)
        assert pdf(spec, MarginalParams(1.0, 1.0), 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_truncated_weibull_density(self, kernel_backend):
        # hand evaluation of the truncated-Weibull formula at lambda=k=1,
        # tau=1, t=0.5, cross-checked by numerically normalizing on [0, 1]
        spec = MarginalSpec(MarginalFamily.WEIBULL, truncation=1.0)
        got = pdf(spec, MarginalParams(1.0, 1.0), 0.5)
        assert got == pytest.approx(0.9595173756674719, rel=1e-12)
        norm, _ = scipy.integrate.quad(lambda t: math.exp(-t), 0.0, 1.0)
        assert got == pytest.approx(math.exp(-0.5) / norm, rel=1e-9)

    def test_huge_truncation_is_no_truncation(self, kernel_backend):
        for family, sets in CASES.items():
            a, b = sets[0]
            free = MarginalSpec(family)
            far = MarginalSpec(family, truncation=1e9)
            assert pdf(far, MarginalParams(a, b), 1.0) == pytest.approx(
                pdf(free, MarginalParams(a, b), 1.0), abs=1e-10
            )

    def test_loglogistic_median_at_scale(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.LOGLOGISTIC)
        assert cdf(spec, MarginalParams(1.7, 2.9), 1.7) == pytest.approx(0.5, abs=1e-14)

    def test_weibull_cdf(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.WEIBULL)
        assert cdf(spec, MarginalParams(1.0, 1.0), 1.0) == pytest.approx(
            1.0 - math.exp(-1.0), rel=1e-14
        )

    def test_truncated_cdf_hits_one_at_tau(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.WEIBULL, truncation=1.0)
        assert cdf(spec, MarginalParams(1.0, 1.0), 1.0) == 1.0
        assert cdf(spec, MarginalParams(1.0, 1.0), 5.0) == 1.0

    def test_weibull_quantile(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.WEIBULL)
        assert quantile(spec, MarginalParams(1.0, 1.0), 1.0 - math.exp(-1.0)) == pytest.approx(
            1.0, rel=1e-12
        )

    def test_lognormal_median(self, kernel_backend):
        spec = MarginalSpec(MarginalFamily.LOGNORMAL)
        assert median(spec, MarginalParams(0.8, 1.3)) == pytest.approx(math.exp(1.3), rel=1e-12)


class TestInvariants:
    @pytest.mark.parametrize("family", list(CASES))
    @pytest.mark.parametrize("truncated", [False, True])
    def test_pdf_integrates_to_one(self, family, truncated, rng):
        for a, b in CASES[family]:
            tau = float(quantile(MarginalSpec(family), MarginalParams(a, b), 0.9)) if truncated else None
            spec = MarginalSpec(family, truncation=tau)
            params = MarginalParams(a, b)
            hi = tau if truncated else np.inf
            total, err = scipy.integrate.quad(
                lambda t: pdf(spec, params, t), 0.0, hi, limit=200
            )
            assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("family", list(CASES))
    def test_cdf_derivative_is_pdf(self, family, rng):
        a, b = CASES[family][-1]
        spec = MarginalSpec(family, truncation=None)
        params = MarginalParams(a, b)
        ts = quantile(spec, params, rng.uniform(0.05, 0.95, 20))
        h = 1e-6
        fd = (cdf(spec, params, ts + h) - cdf(spec, params, ts - h)) / (2 * h)
        assert np.max(np.abs(fd - pdf(spec, params, ts))) < 1e-6

    @pytest.mark.parametrize("family", list(CASES))
    @pytest.mark.parametrize("truncated", [False, True])
    def test_quantile_cdf_roundtrip(self, family, truncated, rng, kernel_backend):
        a, b = CASES[family][0]
        tau = 2.0 if truncated else None
        spec = MarginalSpec(family, truncation=tau)
        params = MarginalParams(a, b)
        q = rng.uniform(0.01, 0.99, 50)
        t = quantile(spec, params, q)
        if truncated:
            assert np.all(t <= tau)
        assert np.max(np.abs(cdf(spec, params, t) - q)) < 1e-8
        q2 = cdf(spec, params, t)
        assert np.max(np.abs(quantile(spec, params, np.clip(q2, 1e-12, 1 - 1e-12)) - t)) < 1e-6

    @pytest.mark.parametrize("family", list(CASES))
    def test_truncated_pdf_is_exact_ratio(self, family, kernel_backend):
        a, b = CASES[family][0]
        tau = 1.7
        trunc = MarginalSpec(family, truncation=tau)
        free = MarginalSpec(family)
        params = MarginalParams(a, b)
        ts = np.linspace(0.05, tau, 15)
        num = pdf(free, params, ts)
        den = cdf(free, params, tau)
        assert np.array_equal(pdf(trunc, params, ts), num / den)

    @pytest.mark.parametrize("family", list(CASES))
    def test_matches_scipy_reference(self, family, kernel_backend):
        for a, b in CASES[family]:
            ref = scipy_frozen(family, a, b)
            spec = MarginalSpec(family)
            params = MarginalParams(a, b)
            t = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
            np.testing.assert_allclose(pdf(spec, params, t), ref.pdf(t), rtol=1e-10)
            np.testing.assert_allclose(cdf(spec, params, t), ref.cdf(t), rtol=1e-10, atol=1e-14)
            q = np.array([0.05, 0.3, 0.5, 0.9, 0.99])
            np.testing.assert_allclose(quantile(spec, params, q), ref.ppf(q), rtol=1e-8)


class TestValidation:
    def test_bad_scale(self):
        with pytest.raises(ParameterError):
            pdf(MarginalSpec(MarginalFamily.WEIBULL), MarginalParams(-1.0, 1.0), 1.0)

    def test_bad_shape(self):
        with pytest.raises(ParameterError):
            cdf(MarginalSpec(MarginalFamily.GAMMA), MarginalParams(2.0, 0.0), 1.0)

    def test_lognormal_mu_unrestricted(self):
        assert cdf(MarginalSpec(MarginalFamily.LOGNORMAL), MarginalParams(1.0, -5.0), 1.0) > 0

    def test_negative_time(self):
        with pytest.raises(DomainError):
            pdf(MarginalSpec(MarginalFamily.WEIBULL), MarginalParams(1.0, 1.0), -0.5)

    def test_quantile_domain(self):
        spec = MarginalSpec(MarginalFamily.WEIBULL)
        for q in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(DomainError):
                quantile(spec, MarginalParams(1.0, 1.0), q)

    def test_bad_truncation(self):
        with pytest.raises(ParameterError):
            MarginalSpec(MarginalFamily.WEIBULL, truncation=-2.0)
        with pytest.raises(ParameterError):
            MarginalSpec(MarginalFamily.WEIBULL, truncation=math.inf)

    def test_family_parse(self):
        assert MarginalFamily.parse(" Weibull ") is MarginalFamily.WEIBULL
        with pytest.raises(ParameterError):
            MarginalFamily.parse("normal")
