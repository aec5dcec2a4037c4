import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import kstest

from spherescatter import vmf
from spherescatter.specfun import DomainError, legendre_sequence, sphere_area, sphere_integral
from spherescatter.sphere import UnitVector, north_pole, uniform_sphere
from spherescatter.vmf import VmfParams


def quad_moment(p, kappa, ell):
    """E[P_l(t)] by quadrature of the unnormalized cosine density."""
    x, w = np.polynomial.legendre.leggauss(400)
    theta = 0.5 * math.pi * (x + 1)
    t = np.cos(theta)
    dens = np.exp(kappa * (t - 1)) * np.sin(theta) ** (p - 2) * w
    return float(np.sum(dens * legendre_sequence(ell, p, t)[ell]) / np.sum(dens))


def test_log_pdf_uniform_limit():
    params = VmfParams(north_pole(3), 0.0)
    x = uniform_sphere(3, 5, np.random.default_rng(0))
    np.testing.assert_allclose(vmf.log_pdf(x, params), math.log(1 / (4 * math.pi)))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_log_normalizer_small_kappa_limit(p):
    assert vmf.log_normalizer(p, 1e-300) == pytest.approx(-math.log(sphere_area(p)), rel=1e-14)
    assert vmf.log_normalizer(p, 1e-6) == pytest.approx(-math.log(sphere_area(p)), abs=1e-11)


@pytest.mark.parametrize("p", [2, 3, 4, 7])
@pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
def test_density_integrates_to_one(p, kappa):
    total = sphere_integral(lambda t: np.exp(vmf.log_pdf_cosine(t, p, kappa)), p)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_mode_at_mean_direction():
    params = VmfParams(UnitVector([0, 1, 0]), 3.0)
    x = uniform_sphere(3, 1000, np.random.default_rng(1))
    at_mu = vmf.log_pdf(params.mu.coords, params)
    assert np.all(vmf.log_pdf(x, params) < at_mu)


def test_mean_resultant_length_examples():
    assert vmf.mean_resultant_length(3, 10.0) == pytest.approx(1 / math.tanh(10.0) - 0.1, rel=1e-14)
    assert vmf.mean_resultant_length(3, 10.0) == pytest.approx(0.9, abs=1e-7)
    assert 0.9899 <= vmf.mean_resultant_length(3, 100.0) <= 0.9901
    assert 0.99899 <= vmf.mean_resultant_length(3, 1000.0) <= 0.99901
    assert vmf.mean_resultant_length(7, 0.0) == 0.0


def test_derivative_closed_form_p3():
    # A_3'(k) = 1/k^2 - 1/sinh^2 k
    for k in (0.5, 2.0, 30.0):
        assert vmf.mean_resultant_length_derivative(3, k) == pytest.approx(1 / k**2 - 1 / math.sinh(k) ** 2, rel=1e-10)
    assert vmf.mean_resultant_length_derivative(3, 2.0) == pytest.approx(0.17398, abs=1e-5)
    assert vmf.mean_resultant_length_derivative(4, 0.0) == 0.25


@pytest.mark.parametrize("p", [2, 3, 6])
def test_derivative_matches_finite_difference(p):
    for k in (1e-3, 0.7, 15.0, 400.0):
        h = 1e-5 * max(k, 1e-2)
        fd = (vmf.mean_resultant_length(p, k + h) - vmf.mean_resultant_length(p, k - h)) / (2 * h)
        assert vmf.mean_resultant_length_derivative(p, k) == pytest.approx(fd, rel=1e-6)


def test_concentration_from_rho_examples():
    assert vmf.concentration_from_rho(3, 0.0) == 0.0
    k = vmf.concentration_from_rho(3, 0.9)
    assert k == pytest.approx(10.0, abs=1e-4)
    assert vmf.mean_resultant_length(3, k) == pytest.approx(0.9, abs=1e-12)
    assert vmf.concentration_from_rho(3, 0.3130353) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        vmf.concentration_from_rho(3, 1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 10), st.floats(1e-3, 5e3))
def test_rho_round_trip(p, kappa):
    rho = vmf.mean_resultant_length(p, kappa)
    k = vmf.concentration_from_rho(p, rho)
    assert abs(vmf.mean_resultant_length(p, k) - rho) <= 1e-12
    assert k == pytest.approx(kappa, rel=1e-10 / max(vmf.mean_resultant_length_derivative(p, kappa) * kappa, 1e-6) + 1e-10)


def test_a_p_increasing_on_grid():
    for p in (2, 3, 5, 10):
        a = [vmf.mean_resultant_length(p, k) for k in np.geomspace(1e-3, 1e4, 60)]
        assert np.all(np.diff(a) > 0) and a[-1] < 1


def test_fourier_coefficient_examples():
    for p in (2, 3, 8):
        assert vmf.fourier_coefficient(p, 3.0, 0) == 1.0
        assert vmf.fourier_coefficient(p, 3.0, 1) == vmf.mean_resultant_length(p, 3.0)
    assert vmf.fourier_coefficient(3, 2.0, 3) == pytest.approx(quad_moment(3, 2.0, 3), abs=1e-10)
    np.testing.assert_array_equal(vmf.fourier_coefficients(4, 0.0, 3), [1, 0, 0, 0])


@pytest.mark.parametrize("p", [3, 4, 5])
@pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
def test_fourier_matches_quadrature(p, kappa):
    seq = vmf.fourier_coefficients(p, kappa, 10)
    for ell in range(11):
        assert seq[ell] == pytest.approx(quad_moment(p, kappa, ell), abs=1e-9)


def test_fourier_decreasing_in_order():
    for p in (2, 3, 6):
        for k in (0.5, 20.0, 3000.0):
            f = vmf.fourier_coefficients(p, k, 60)
            assert np.all(np.diff(f) < 0) and np.all(np.abs(f) <= 1)


def test_sampler_mean_and_moments():
    rng = np.random.default_rng(7)
    n = 1_000_000
    params = VmfParams(UnitVector([0.0, 0.6, 0.8]), 5.0)
    x = vmf.sample(params, n, rng)
    a = vmf.mean_resultant_length(3, 5.0)
    sd = x.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(x.mean(axis=0) - a * params.mu.coords) < 4 * sd)
    t = x @ params.mu.coords
    P = legendre_sequence(5, 3, t)
    for ell in range(1, 6):
        se = P[ell].std() / math.sqrt(n)
        assert abs(P[ell].mean() - vmf.fourier_coefficient(3, 5.0, ell)) < 4 * se


def test_uniform_sampler_mean():
    rng = np.random.default_rng(8)
    x = vmf.sample(VmfParams(north_pole(4), 0.0), 200_000, rng)
    assert np.all(np.abs(x.mean(axis=0)) < 4 * x.std(axis=0) / math.sqrt(2e5))


@pytest.mark.parametrize("p,kappa", [(2, 3.0), (5, 0.2), (10, 40.0)])
def test_sample_cosine_ks(p, kappa):
    rng = np.random.default_rng(9)
    t = vmf.sample_cosine(p, kappa, 20_000, rng)
    # CDF of t tabulated over theta, where the surface weight sin^{p-2} is smooth
    theta = np.linspace(0.0, math.pi, 200_001)
    f = np.exp(kappa * (np.cos(theta) - 1)) * np.sin(theta) ** (p - 2)
    tail = integrate.cumulative_trapezoid(f, theta, initial=0.0)
    tail /= tail[-1]  # P(angle <= theta) = P(t >= cos theta)

    def cdf(v):
        return 1.0 - np.interp(np.arccos(np.clip(v, -1, 1)), theta, tail)

    assert kstest(t, cdf).pvalue > 1e-3


def test_acceptance_rate_logged(caplog):
    rng = np.random.default_rng(10)
    with caplog.at_level(logging.DEBUG, logger="spherescatter.vmf"):
        vmf.sample_cosine(3, 1e4, 1000, rng)
    rates = [float(r.getMessage().rsplit(" ", 1)[1]) for r in caplog.records if "acceptance" in r.getMessage()]
    assert rates and rates[0] > 0.5


def test_cosine_quantile_p3_closed_form_vs_numeric():
    u = np.array([0.01, 0.3, 0.5, 0.9, 0.999])
    closed = vmf.cosine_quantile(3, 7.0, u)
    from spherescatter.walk import cosine_quantiles

    numeric = cosine_quantiles(lambda t: np.exp(7.0 * (t - 1)), 3, u)
    np.testing.assert_allclose(closed, numeric, atol=1e-6)
