import math

import numpy as np
import pytest
import scipy.stats

from copcure.copulas import (
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
    unit_grid,
)
from copcure.cure_model import ModelSpec, ParamVector
from copcure.errors import DomainError, ParameterError
from copcure.marginals import MarginalFamily, MarginalParams, MarginalSpec

# theta values spanning each family's practically used range (tau up to ~0.8)
THETA_GRID = {
    CopulaFamily.FRANK: [-18.0, -5.0, -1.0, 2.0, 5.0, 12.0, 18.0],
    CopulaFamily.GUMBEL: [1.1, 1.5, 2.0, 3.0, 5.0],
    CopulaFamily.JOE: [1.2, 1.5, 2.0, 3.5, 6.0],
    CopulaFamily.CLAYTON90: [0.3, 0.5, 1.0, 2.0, 6.0],
    CopulaFamily.CLAYTON180: [0.3, 0.5, 1.0, 2.0, 6.0],
    CopulaFamily.CLAYTON270: [0.3, 0.5, 1.0, 2.0, 6.0],
    CopulaFamily.GAUSSIAN: [-0.9, -0.5, -0.2, 0.3, 0.6, 0.9],
}

ALL_SPECS = [CopulaSpec(CopulaFamily.INDEPENDENCE)] + [
    CopulaSpec(fam, th) for fam, grid in THETA_GRID.items() for th in grid
]


def base_clayton_cdf(theta, u, v):
    """Independently coded strict Clayton copula, used as the rotation oracle."""
    return (u ** (-theta) + v ** (-theta) - 1.0) ** (-1.0 / theta)


def fd_dv(spec, u, v, h=1e-6):
    return (copula_cdf(spec, u, v + h) - copula_cdf(spec, u, v - h)) / (2 * h)


def fd_du(spec, u, v, h=1e-6):
    return (copula_cdf(spec, u + h, v) - copula_cdf(spec, u - h, v)) / (2 * h)


class TestExamples:
    def test_independence_cdf(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.INDEPENDENCE)
        assert copula_cdf(spec, 0.3, 0.7) == pytest.approx(0.21, abs=1e-15)

    def test_frank_cdf_value(self, kernel_backend):
        # direct high-precision evaluation of the Frank formula
        spec = CopulaSpec(CopulaFamily.FRANK, 5.0)
        assert copula_cdf(spec, 0.5, 0.5) == pytest.approx(0.37714851074652086, rel=1e-13)

    def test_gumbel_cdf_value(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.GUMBEL, 2.0)
        assert copula_cdf(spec, 0.5, 0.5) == pytest.approx(2.0 ** (-math.sqrt(2.0)), rel=1e-13)

    def test_independence_h(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.INDEPENDENCE)
        assert h_t_given_c(spec, 0.4, 0.9) == pytest.approx(0.4, abs=1e-15)
        assert h_c_given_t(spec, 0.25, 0.6) == pytest.approx(0.25, abs=1e-15)

    def test_frank_h_center_is_half(self, kernel_backend):
        # radial symmetry of Frank forces h(1/2 | 1/2) = 1/2
        spec = CopulaSpec(CopulaFamily.FRANK, 5.0)
        assert h_t_given_c(spec, 0.5, 0.5) == pytest.approx(0.5, abs=1e-14)

    def test_gumbel_h_value(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.GUMBEL, 2.0)
        got = h_t_given_c(spec, 0.5, 0.5)
        assert got == pytest.approx(0.530633048967315, rel=1e-12)
        assert got == pytest.approx(fd_dv(spec, 0.5, 0.5), abs=1e-6)

    def test_gaussian_theta_zero(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.GAUSSIAN, 0.0)
        assert h_c_given_t(spec, 0.37, 0.9) == pytest.approx(0.37, abs=1e-14)

    def test_frank_exchangeable(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.FRANK, 5.0)
        assert h_c_given_t(spec, 0.3, 0.6) == pytest.approx(
            h_t_given_c(spec, 0.3, 0.6), abs=1e-12
        )
        assert copula_density(spec, 0.2, 0.8) == pytest.approx(
            copula_density(spec, 0.8, 0.2), abs=1e-12
        )

    def test_independence_density(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.INDEPENDENCE)
        assert copula_density(spec, 0.123, 0.87) == 1.0


class TestHFunctionsMatchDerivatives:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_h_matches_fd(self, spec, rng):
        u = rng.uniform(0.05, 0.95, 50)
        v = rng.uniform(0.05, 0.95, 50)
        assert np.max(np.abs(h_t_given_c(spec, u, v) - fd_dv(spec, u, v))) < 1e-5
        assert np.max(np.abs(h_c_given_t(spec, v, u) - fd_du(spec, u, v))) < 1e-5

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_h_boundaries(self, spec):
        v = np.array([0.2, 0.5, 0.8])
        assert np.all(h_t_given_c(spec, np.zeros(3), v) < 1e-10)
        assert np.all(h_t_given_c(spec, np.ones(3), v) > 1.0 - 1e-10)
        u = np.sort(np.linspace(0.02, 0.98, 25))
        for vv in v:
            h = h_t_given_c(spec, u, np.full_like(u, vv))
            assert np.all(np.diff(h) > -1e-12)  # nondecreasing in u


class TestDensity:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_density_nonnegative(self, spec):
        g = np.linspace(0.01, 0.99, 50)
        U, V = np.meshgrid(g, g)
        assert np.all(copula_density(spec, U, V) >= 0.0)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_density_integrates_to_one(self, spec):
        # composite tensor Gauss-Legendre with corner-refined panels
        nodes, wts = unit_grid()
        U, V = np.meshgrid(nodes, nodes, indexing="ij")
        total = wts @ copula_density(spec, U, V) @ wts
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
    def test_cdf_margins(self, spec):
        g = np.linspace(0.05, 0.95, 10)
        np.testing.assert_allclose(copula_cdf(spec, g, np.ones_like(g)), g, atol=5e-13)
        np.testing.assert_allclose(copula_cdf(spec, np.ones_like(g), g), g, atol=5e-13)
        assert np.all(copula_cdf(spec, g, np.zeros_like(g)) < 1e-12)
        assert np.all(copula_cdf(spec, np.zeros_like(g), g) < 1e-12)


class TestRotations:
    THETAS = [0.4, 1.0, 2.5, 7.0]

    @pytest.mark.parametrize("theta", THETAS)
    def test_rotation_cdf_identities(self, theta, rng, kernel_backend):
        u = rng.uniform(0.02, 0.98, 40)
        v = rng.uniform(0.02, 0.98, 40)
        c90 = copula_cdf(CopulaSpec(CopulaFamily.CLAYTON90, theta), u, v)
        np.testing.assert_allclose(c90, v - base_clayton_cdf(theta, 1 - u, v), atol=1e-12)
        c180 = copula_cdf(CopulaSpec(CopulaFamily.CLAYTON180, theta), u, v)
        np.testing.assert_allclose(
            c180, u + v - 1 + base_clayton_cdf(theta, 1 - u, 1 - v), atol=1e-12
        )
        c270 = copula_cdf(CopulaSpec(CopulaFamily.CLAYTON270, theta), u, v)
        np.testing.assert_allclose(c270, u - base_clayton_cdf(theta, u, 1 - v), atol=1e-12)


class TestKendallTau:
    def test_independence(self):
        assert kendall_tau(CopulaSpec(CopulaFamily.INDEPENDENCE)) == 0.0

    def test_gumbel_closed_form(self):
        spec = CopulaSpec(CopulaFamily.GUMBEL, 2.0)
        assert kendall_tau(spec) == pytest.approx(0.5, abs=1e-14)
        assert kendall_tau_integral(spec) == pytest.approx(0.5, abs=1e-6)

    def test_clayton90_example(self):
        spec = CopulaSpec(CopulaFamily.CLAYTON90, 0.5)
        assert kendall_tau(spec) == pytest.approx(-0.2, abs=1e-14)
        assert kendall_tau_integral(spec) == pytest.approx(-0.2, abs=1e-6)

    def test_joe_series_oracle(self):
        # independent oracle: tau_Joe = 1 - 4 sum 1/(k(tk+2)(t(k-1)+2))
        theta = 2.0
        k = np.arange(1, 2_000_000, dtype=np.float64)
        series = float(np.sum(1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0))))
        expected = 1.0 - 4.0 * series
        assert kendall_tau(CopulaSpec(CopulaFamily.JOE, theta)) == pytest.approx(
            expected, abs=1e-9
        )

    @pytest.mark.parametrize(
        "family", [f for f in CopulaFamily if f is not CopulaFamily.INDEPENDENCE]
    )
    def test_closed_form_matches_integral(self, family):
        for theta in THETA_GRID[family]:
            spec = CopulaSpec(family, theta)
            assert kendall_tau(spec) == pytest.approx(
                kendall_tau_integral(spec), abs=1e-6
            ), f"{family} theta={theta}"

    @pytest.mark.parametrize(
        "family", [f for f in CopulaFamily if f is not CopulaFamily.INDEPENDENCE]
    )
    def test_theta_from_tau_roundtrip(self, family):
        for theta in THETA_GRID[family]:
            tau = kendall_tau(CopulaSpec(family, theta))
            assert kendall_tau(
                CopulaSpec(family, theta_from_tau(family, tau))
            ) == pytest.approx(tau, abs=1e-8)

    def test_known_inversions(self):
        assert theta_from_tau(CopulaFamily.GUMBEL, 0.5) == pytest.approx(2.0, rel=1e-10)
        assert theta_from_tau(CopulaFamily.GAUSSIAN, 0.5) == pytest.approx(
            math.sin(math.pi / 4.0), rel=1e-12
        )
        assert theta_from_tau(CopulaFamily.FRANK, 0.0) == 0.0

    def test_unattainable_tau(self):
        with pytest.raises(DomainError):
            theta_from_tau(CopulaFamily.GUMBEL, -0.3)
        with pytest.raises(DomainError):
            theta_from_tau(CopulaFamily.CLAYTON90, 0.4)
        with pytest.raises(DomainError):
            theta_from_tau(CopulaFamily.FRANK, 1.0)
        with pytest.raises(DomainError):
            theta_from_tau(CopulaFamily.INDEPENDENCE, 0.2)


class TestSampling:
    def test_independence_returns_raw_uniforms(self, kernel_backend):
        u, v = sample_pair(CopulaSpec(CopulaFamily.INDEPENDENCE), np.random.default_rng(5), 1000)
        r = np.random.default_rng(5)
        assert np.array_equal(u, r.random(1000))
        assert np.array_equal(v, r.random(1000))

    def test_same_seed_same_sample(self):
        spec = CopulaSpec(CopulaFamily.JOE, 2.0)
        a = sample_pair(spec, np.random.default_rng(11), 100)
        b = sample_pair(spec, np.random.default_rng(11), 100)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    @pytest.mark.parametrize("spec", ALL_SPECS[::3], ids=str)
    def test_hinv_inverts_h(self, spec, rng, kernel_backend):
        w = rng.uniform(0.02, 0.98, 200)
        u = rng.uniform(0.02, 0.98, 200)
        v = h_inverse_c_given_t(spec, w, u)
        assert np.max(np.abs(h_c_given_t(spec, v, u) - w)) < 1e-8

    @pytest.mark.parametrize(
        "family,tau",
        [
            (CopulaFamily.FRANK, 0.5),
            (CopulaFamily.GUMBEL, 0.5),
            (CopulaFamily.JOE, 0.4),
            (CopulaFamily.CLAYTON90, -0.5),
            (CopulaFamily.GAUSSIAN, 0.3),
        ],
    )
    def test_sample_reproduces_tau(self, family, tau):
        spec = CopulaSpec(family, theta_from_tau(family, tau))
        u, v = sample_pair(spec, np.random.default_rng(99), 20_000)
        emp = scipy.stats.kendalltau(u, v).statistic
        assert emp == pytest.approx(tau, abs=0.02)
        # margins stay uniform
        assert scipy.stats.kstest(u, "uniform").pvalue > 0.001
        assert scipy.stats.kstest(v, "uniform").pvalue > 0.001


class TestValidation:
    def test_theta_domains(self):
        with pytest.raises(ParameterError):
            CopulaSpec(CopulaFamily.GUMBEL, 0.8)
        with pytest.raises(ParameterError):
            CopulaSpec(CopulaFamily.CLAYTON90, -1.0)
        with pytest.raises(ParameterError):
            CopulaSpec(CopulaFamily.GAUSSIAN, 1.0)
        with pytest.raises(ParameterError):
            CopulaSpec(CopulaFamily.INDEPENDENCE, 0.5)
        with pytest.raises(ParameterError):
            CopulaSpec(CopulaFamily.FRANK, None)

    def test_frank_tiny_theta_is_independence(self, kernel_backend):
        spec = CopulaSpec(CopulaFamily.FRANK, 1e-12)
        assert copula_cdf(spec, 0.3, 0.7) == pytest.approx(0.21, abs=1e-12)
        assert kendall_tau(spec) == 0.0

    def test_unit_square_domain(self):
        spec = CopulaSpec(CopulaFamily.FRANK, 2.0)
        with pytest.raises(DomainError):
            copula_cdf(spec, 1.2, 0.5)
        with pytest.raises(DomainError):
            h_t_given_c(spec, -0.1, 0.5)


class TestIdentifiabilityDiagnostics:
    def _model_alpha(self, family, theta, p=0.8):
        model = ModelSpec(
            copula=family,
            latency=MarginalSpec(MarginalFamily.WEIBULL),
            censoring=MarginalSpec(MarginalFamily.WEIBULL),
        )
        alpha = ParamVector(
            theta=theta,
            latency_params=MarginalParams(0.5, 1.0),
            censoring_params=MarginalParams(1.0, 1.0),
            p=p,
        )
        return model, alpha

    def test_frank_passes(self):
        model, alpha = self._model_alpha(CopulaFamily.FRANK, 5.0)
        assert check_identifiability_limits(model, alpha).passed

    def test_independence_passes(self):
        model, alpha = self._model_alpha(CopulaFamily.INDEPENDENCE, None)
        assert check_identifiability_limits(model, alpha).passed

    def test_gaussian_nonpositive_theta(self):
        model, alpha = self._model_alpha(CopulaFamily.GAUSSIAN, -0.4)
        report = check_identifiability_limits(model, alpha)
        gauss = [d for d in report.diagnostics if "gaussian" in d.name][0]
        assert gauss.value == -math.inf and gauss.passed
        assert report.passed

    def test_gumbel_ratio_reported(self):
        model, alpha = self._model_alpha(CopulaFamily.GUMBEL, 2.0)
        report = check_identifiability_limits(model, alpha)
        assert any("gumbel" in d.name for d in report.diagnostics)
        assert "PASS" in str(report) or "FAIL" in str(report)
