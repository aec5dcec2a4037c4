import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from spherescatter import vmf
from spherescatter.specfun import DomainError, legendre_sequence, sphere_area, sphere_integral
from spherescatter.sphere import UnitVector
from spherescatter.scatter import (
    AsymptoticValidityWarning,
    Fixed,
    NegativeBinomial,
    Poisson,
    ScatteringModel,
    asymptotic_mixture,
    continuous_coefficients,
    count_weights,
    equivalent_concentration,
    legendre_moments,
    pgf,
    sample_process,
    scattering_pdf,
)
from spherescatter.walk import ZonalCoefficients, check_unimodality, directional_pdf

POISSON = ScatteringModel(3, Poisson(10.0), kappa=100.0)
NEGBIN = ScatteringModel(3, NegativeBinomial(10.0, 0.5), kappa=100.0)


def test_poisson_weights():
    assert count_weights(Poisson(2.0), 0)[0] == pytest.approx(math.exp(-2), rel=1e-15)
    w = count_weights(Poisson(2.0), 10)
    np.testing.assert_allclose(w, stats.poisson.pmf(np.arange(11), 2.0), rtol=1e-13)


def test_negbin_geometric_case():
    nb = NegativeBinomial.from_gamma_cox(1.0, 1.0)
    np.testing.assert_allclose(count_weights(nb, 4), [0.5, 0.25, 0.125, 0.0625, 0.03125], rtol=1e-14)


@pytest.mark.parametrize("c", [Poisson(0.3), Poisson(10.0), Poisson(400.0), NegativeBinomial(10.0, 0.5),
                               NegativeBinomial(0.2, 0.9), NegativeBinomial(50.0, 0.01), Fixed(3)])
def test_adaptive_weights_sum_to_one(c):
    w = c.weights()
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)


def test_negbin_log_space_no_underflow():
    w = count_weights(NegativeBinomial(10.0, 0.5), 2000)
    assert np.all(np.isfinite(w)) and w[-1] >= 0
    assert w[1500] == pytest.approx(stats.nbinom.pmf(1500, 10, 0.5), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 50.0), st.floats(0.05, 20.0))
def test_gamma_cox_round_trip(xi_t, theta):
    nb = NegativeBinomial.from_gamma_cox(xi_t, theta)
    assert nb.xi_t == xi_t
    assert nb.theta == pytest.approx(theta, rel=1e-13)
    assert nb.q == pytest.approx(1 / (theta + 1), rel=1e-15)


def test_invalid_counting_parameters():
    with pytest.raises(DomainError):
        Poisson(0.0)
    with pytest.raises(DomainError):
        NegativeBinomial(1.0, 1.0)
    with pytest.raises(DomainError):
        NegativeBinomial.from_gamma_cox(1.0, -1.0)


@pytest.mark.parametrize("xi_t,theta", [(1.0, 1.0), (10.0, 1.0), (10.0, 0.5)])
def test_gamma_cox_transform_matches_negbin(xi_t, theta):
    """P(N=n) = int Poisson(n; lam) Gamma(lam; shape xi_t, rate theta) dlam."""
    nb = NegativeBinomial.from_gamma_cox(xi_t, theta)
    w = count_weights(nb, 50)
    g = stats.gamma(xi_t, scale=1 / theta)
    for n in range(51):
        val = integrate.quad(lambda lam: stats.poisson.pmf(n, lam) * g.pdf(lam), 0, np.inf,
                             epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        assert abs(val - w[n]) < 1e-8


def test_pgf_examples():
    for c in (Poisson(3.0), NegativeBinomial(2.0, 0.3), Fixed(4)):
        assert pgf(c, 1.0) == pytest.approx(1.0, rel=1e-15)
        assert abs(pgf(c, 0.0) - count_weights(c, 0)[0]) < 1e-14
    assert pgf(Poisson(10.0), 0.9) == pytest.approx(math.exp(-1), rel=1e-14)
    with pytest.raises(DomainError):
        pgf(Poisson(1.0), 1.5)


@pytest.mark.parametrize("c", [Poisson(4.0), NegativeBinomial(3.0, 0.4)])
def test_pgf_equals_weighted_sum(c):
    w = c.weights()
    for z in (-0.9, 0.2, 0.99):
        assert pgf(c, z) == pytest.approx(math.fsum(w * z ** np.arange(w.size)), abs=1e-12)


def test_legendre_moments_closed_forms():
    f = vmf.fourier_coefficients(3, 100.0, 6)
    np.testing.assert_allclose(legendre_moments(POISSON, 6), np.exp(-10 * (1 - f)), rtol=1e-14)
    np.testing.assert_allclose(legendre_moments(NEGBIN, 6), (0.5 / (1 - 0.5 * f)) ** 10, rtol=1e-13)
    assert legendre_moments(NEGBIN, 0)[0] == pytest.approx(1.0)


def test_coefficient_identity():
    for m in (POISSON, NEGBIN):
        h, p0 = continuous_coefficients(m, 20)
        np.testing.assert_allclose(h.coeffs + p0, legendre_moments(m, 20), rtol=0, atol=1e-14)


def test_continuous_coefficients_series_oracle():
    for m in (POISSON, NEGBIN):
        h, _ = continuous_coefficients(m, 15)
        w = m.counting.weights()
        f = vmf.fourier_coefficients(3, 100.0, 15)
        n = np.arange(1, w.size)
        series = (w[1:, None] * f[None, :] ** n[:, None]).sum(axis=0)
        np.testing.assert_allclose(h.coeffs, series, atol=1e-10)


def test_continuous_coefficients_poisson_form_and_decay():
    h, p0 = continuous_coefficients(POISSON, 400)
    f = vmf.fourier_coefficients(3, 100.0, 5)
    np.testing.assert_allclose(h.coeffs[:6], math.exp(-10) * np.expm1(10 * f), rtol=1e-13)
    assert p0 == pytest.approx(math.exp(-10))
    assert h.coeffs[-1] < 1e-12


@pytest.mark.parametrize("m", [POISSON, NEGBIN, ScatteringModel(4, Poisson(2.0), kappa=5.0)])
def test_total_measure_is_one(m):
    p0, _ = scattering_pdf(m, 0.0)
    total = sphere_integral(lambda t: scattering_pdf(m, t)[1], m.p)
    assert total + p0 == pytest.approx(1.0, abs=1e-6)


def test_large_rate_tends_to_uniform():
    m = ScatteringModel(3, Poisson(200.0), kappa=5.0)
    _, g = scattering_pdf(m, np.linspace(-1, 1, 9))
    np.testing.assert_allclose(g, 1 / (4 * math.pi), rtol=1e-8)


def test_generic_step_model():
    step = ZonalCoefficients.vmf(3, 20.0)
    a = ScatteringModel(3, Poisson(3.0), step=step)
    b = ScatteringModel(3, Poisson(3.0), kappa=20.0)
    np.testing.assert_allclose(legendre_moments(a, 8), legendre_moments(b, 8), rtol=1e-14)
    with pytest.raises(NotImplementedError):
        sample_process(a, 5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ScatteringModel(3, Poisson(3.0))


def test_sample_process_direct_paths_and_moments():
    rng = np.random.default_rng(21)
    m = ScatteringModel(3, Poisson(2.0), kappa=30.0, mu=UnitVector([0.6, 0.0, 0.8]))
    count = 200_000
    x, n = sample_process(m, count, rng)
    direct = n == 0
    np.testing.assert_array_equal(x[direct], np.tile(m.mu.coords, (direct.sum(), 1)))
    p0 = m.p0
    assert abs(direct.mean() - p0) < 4 * math.sqrt(p0 * (1 - p0) / count)
    P = legendre_sequence(5, 3, x @ m.mu.coords)
    mom = legendre_moments(m, 5)
    for ell in range(1, 6):
        assert abs(P[ell].mean() - mom[ell]) < 4 * P[ell].std() / math.sqrt(count)


def test_negbin_sampler_matches_weights():
    rng = np.random.default_rng(22)
    nb = NegativeBinomial(3.0, 0.6)
    draws = nb.sample(200_000, rng)
    w = nb.weights()
    for k in range(6):
        frac = np.mean(draws == k)
        assert abs(frac - w[k]) < 4 * math.sqrt(w[k] * (1 - w[k]) / 2e5)


def test_equivalent_concentration():
    assert equivalent_concentration(1000.0, 10) == pytest.approx(100.45)
    assert equivalent_concentration(37.0, 1) == 37.0


def test_asymptotic_mixture_moments_close_to_exact():
    m = ScatteringModel(3, Poisson(5.0), kappa=1000.0)
    mix = asymptotic_mixture(m)
    h, p0 = continuous_coefficients(m, 10)
    assert mix.mass == pytest.approx(p0)
    assert np.max(np.abs(mix.legendre_moments(10) - h.coeffs)) < 1e-4
    assert math.fsum(mix.weights) + mix.mass >= 1 - 1e-10


def test_single_step_mixture_is_exact_vmf():
    m = ScatteringModel(3, Fixed(1), kappa=25.0)
    mix = asymptotic_mixture(m)
    assert mix.kappas.tolist() == [25.0]
    t = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(mix.density(t), np.exp(vmf.log_pdf_cosine(t, 3, 25.0)), rtol=1e-13)


def test_asymptotic_warning_outside_validity():
    with pytest.warns(AsymptoticValidityWarning):
        asymptotic_mixture(ScatteringModel(3, Poisson(10.0), kappa=20.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        asymptotic_mixture(ScatteringModel(3, Poisson(1.0), kappa=1000.0))


def test_mixture_sampler():
    rng = np.random.default_rng(23)
    m = ScatteringModel(3, Poisson(3.0), kappa=500.0)
    mix = asymptotic_mixture(m)
    x, n = mix.sample(100_000, rng)
    t = x @ m.mu.coords
    mom = mix.legendre_moments(3) + mix.mass
    P = legendre_sequence(3, 3, t)
    for ell in (1, 2, 3):
        assert abs(P[ell].mean() - mom[ell]) < 4 * P[ell].std() / math.sqrt(1e5)
    assert np.all(t[n == 0] == 1.0)


def test_error_scaling_third_order():
    kappas = np.array([250.0, 500.0, 1000.0, 2000.0])
    err = []
    for k in kappas:
        exact = vmf.fourier_coefficient(3, k, 2) ** 10
        approx = vmf.fourier_coefficient(3, float(equivalent_concentration(k, 10)), 2)
        err.append(abs(exact - approx))
    slope = np.polyfit(np.log(kappas), np.log(err), 1)[0]
    assert -3.3 <= slope <= -2.7


@pytest.mark.parametrize("m", [POISSON, NEGBIN])
def test_continuous_part_unimodal(m):
    h, _ = continuous_coefficients(m)
    ok, worst = check_unimodality(h)
    assert ok, worst


def test_normalized_continuous_part_is_probability():
    h, p0 = continuous_coefficients(NEGBIN, 30)
    z = h.normalized()
    assert z[0] == 1.0 and np.all(np.abs(z.coeffs) <= 1)
    assert sphere_integral(lambda t: directional_pdf(z, t), 3) == pytest.approx(1.0, abs=1e-6)
    assert directional_pdf(z, -1.0) < 1 / sphere_area(3)
