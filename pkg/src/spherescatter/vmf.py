"""von Mises-Fisher law M_p(mu, kappa): density, mean resultant length,
Legendre moments and exact sampling."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    DomainError,
    bessel_i_ratio,
    bessel_ratio_sequence,
    log_bessel_i_reduced,
    log_sphere_area,
)
from .sphere import UnitVector, as_unit, sample_normal_subsphere

__all__ = [
    "VmfParams",
    "log_normalizer",
    "log_pdf",
    "log_pdf_cosine",
    "mean_resultant_length",
    "mean_resultant_length_derivative",
    "concentration_from_rho",
    "fourier_coefficient",
    "fourier_coefficients",
    "sample_cosine",
    "sample",
    "sample_around",
    "cosine_quantile",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VmfParams:
    mu: UnitVector
    kappa: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", as_unit(self.mu))
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def p(self) -> int:
        return self.mu.dim


def _check(p: int, kappa: float) -> None:
    if int(p) != p or p < 2:
        raise DomainError(f"dimension p must be an integer >= 2, got {p}")
    if not kappa >= 0:
        raise DomainError(f"kappa must be >= 0, got {kappa}")


def log_normalizer(p: int, kappa: float) -> float:
    """ln of kappa^{p/2-1} / ((2 pi)^{p/2} I_{p/2-1}(kappa)).

    Written through the reduced Bessel series so the kappa -> 0 limit
    (the uniform density 1/area(S^{p-1})) comes out without a 0/0.
    """
    _check(p, kappa)
    nu = 0.5 * p - 1.0
    return (
        math.lgamma(nu + 1.0)
        - math.log(2.0)
        - 0.5 * p * math.log(math.pi)
        - log_bessel_i_reduced(nu, kappa)
    )


def log_pdf_cosine(t, p: int, kappa: float):
    """Log density at any point whose cosine to the mean direction is ``t``."""
    return log_normalizer(p, kappa) + kappa * np.asarray(t, dtype=float)


def log_pdf(x, params: VmfParams):
    """Log density of ``x`` (a UnitVector or an ``(n, p)`` array of unit rows)."""
    mu = params.mu.coords
    xs = np.asarray(x, dtype=float)
    if xs.shape[-1] != mu.size:
        raise ValueError("dimension mismatch")
    t = xs @ mu
    if params.kappa == 0:
        return np.full(np.shape(t), -log_sphere_area(params.p))[()]
    return log_pdf_cosine(t, params.p, params.kappa)[()]


def mean_resultant_length(p: int, kappa: float) -> float:
    """A_p(kappa) = I_{p/2}(kappa) / I_{p/2-1}(kappa)."""
    _check(p, kappa)
    if kappa == 0:
        return 0.0
    return bessel_i_ratio(0.5 * p - 1.0, 1, kappa)


def mean_resultant_length_derivative(p: int, kappa: float) -> float:
    """A_p'(kappa) = 1 - A^2 - (p-1) A / kappa, equal to Var(mu^T x)."""
    _check(p, kappa)
    if kappa == 0:
        return 1.0 / p
    a = mean_resultant_length(p, kappa)
    if kappa < 1e-4:
        # series A = k/p - k^3/(p^2 (p+2)) + ...
        return 1.0 / p - 3.0 * kappa**2 / (p * p * (p + 2))
    return 1.0 - a * a - (p - 1) * a / kappa


def concentration_from_rho(p: int, rho: float) -> float:
    """Invert rho = A_p(kappa) by Newton iterations safeguarded with bisection."""
    if int(p) != p or p < 2:
        raise DomainError(f"dimension p must be an integer >= 2, got {p}")
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    if rho == 0.0:
        return 0.0
    k = rho * (p - rho * rho) / (1.0 - rho * rho)
    lo, hi = 0.0, 2.0 * k + 50.0
    for _ in range(200):
        a = mean_resultant_length(p, k)
        f = a - rho
        if abs(f) <= 1e-15:
            break
        if f > 0:
            hi = k
        else:
            lo = k
        step = f / mean_resultant_length_derivative(p, k)
        k_new = k - step
        if not lo < k_new < hi:
            k_new = 0.5 * (lo + hi)
        if abs(k_new - k) <= 1e-15 * max(k, 1.0):
            k = k_new
            break
        k = k_new
    return k


def fourier_coefficient(p: int, kappa: float, ell: int) -> float:
    """Legendre moment E[P_ell(mu^T x)] = I_{ell+nu}(kappa)/I_nu(kappa), nu = p/2-1."""
    _check(p, kappa)
    if ell == 0:
        return 1.0
    if kappa == 0:
        return 0.0
    return bessel_i_ratio(0.5 * p - 1.0, ell, kappa)


def fourier_coefficients(p: int, kappa: float, ell_max: int) -> np.ndarray:
    """All Legendre moments for ell = 0..ell_max from one ratio sweep."""
    _check(p, kappa)
    out = np.zeros(ell_max + 1)
    out[0] = 1.0
    if ell_max == 0 or kappa == 0:
        return out
    ratios = bessel_ratio_sequence(0.5 * p - 1.0, kappa, ell_max)
    out[1:] = np.cumprod(ratios)
    return out


def sample_cosine(p: int, kappa: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw t = mu^T x for x ~ M_p(mu, kappa).

    Wood's rejection scheme for the density proportional to
    exp(kappa t) (1 - t^2)^{(p-3)/2}; exact for every p >= 2.
    """
    _check(p, kappa)
    if kappa == 0:
        if p == 2:
            return np.cos(rng.uniform(0.0, 2.0 * math.pi, size))
        return 2.0 * rng.beta(0.5 * (p - 1), 0.5 * (p - 1), size) - 1.0
    d = p - 1.0
    b = d / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + d * d))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + d * math.log1p(-x0 * x0)
    out = np.empty(size)
    filled = 0
    drawn = 0
    while filled < size:
        m = max(16, int(1.2 * (size - filled)) + 8)
        z = rng.beta(0.5 * d, 0.5 * d, m)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(m)
        ok = kappa * w + d * np.log1p(-x0 * w) - c >= np.log(u)
        acc = w[ok][: size - filled]
        out[filled : filled + acc.size] = acc
        filled += acc.size
        drawn += m
    log.debug("vMF rejection sampler p=%d kappa=%g acceptance %.3f", p, kappa, size / drawn)
    return out


def sample_around(axes: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """One vMF draw around each row of ``axes`` (shape ``(m, p)``)."""
    axes = np.asarray(axes, dtype=float)
    m, p = axes.shape
    t = sample_cosine(p, kappa, m, rng)
    xi = sample_normal_subsphere(axes, rng, size=m)
    x = t[:, None] * axes + np.sqrt(np.clip(1.0 - t * t, 0.0, None))[:, None] * xi
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x


def sample(params: VmfParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws from M_p(mu, kappa) as an ``(n, p)`` array of unit rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    axes = np.broadcast_to(params.mu.coords, (n, params.p))
    return sample_around(axes, params.kappa, rng)


def cosine_quantile(p: int, kappa: float, u):
    """Quantiles of t = mu^T x. Closed form for p = 3, numerical CDF otherwise."""
    u = np.asarray(u, dtype=float)
    if p == 3 and kappa > 0:
        return 1.0 + np.log(u + (1.0 - u) * math.exp(-2.0 * kappa)) / kappa
    from .walk import cosine_quantiles

    return cosine_quantiles(lambda t: np.exp(kappa * (t - 1.0)), p, u)
