"""Special functions: modified Bessel I, dimension-p Legendre polynomials,
zonal normalizing constants and Gauss-Legendre quadrature.

The Bessel routines work in log space or with ratios so that the large
concentrations met on the sphere (kappa in the thousands) never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import zeta

__all__ = [
    "DomainError",
    "log_bessel_i",
    "log_bessel_i_reduced",
    "bessel_i_ratio",
    "bessel_ratio_sequence",
    "legendre_p",
    "legendre_sequence",
    "normalizing_constant",
    "normalizing_constants",
    "log_sphere_area",
    "sphere_area",
    "QuadratureRule",
    "gauss_legendre",
    "integrate",
    "sphere_integral",
]

# power series below this argument, asymptotic expansions above
SERIES_SWITCH = 30.0
# Debye expansion needs a large order; Hankel covers small orders
DEBYE_MIN_ORDER = 15.0
_DEBYE_TERMS = 14


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check_bessel_args(nu: float, x: float) -> None:
    if not nu >= 0:
        raise DomainError(f"order must be >= 0, got {nu}")
    if not x > 0:
        raise DomainError(f"argument must be > 0, got {x}")


def _series_switch(nu: float) -> float:
    return max(SERIES_SWITCH, 2.0 * nu)


_ZETA = tuple(float(zeta(k)) for k in range(2, 42))


def _lgamma1p(nu: float) -> float:
    """ln Gamma(1 + nu), without rounding 1 + nu first when nu is small."""
    if nu >= 0.2:
        return math.lgamma(1.0 + nu)
    # ln Gamma(1+v) = -gamma v + sum_{k>=2} (-v)^k zeta(k) / k
    total = 0.0
    pw = -nu
    for k, z in enumerate(_ZETA, start=2):
        pw *= -nu
        total += pw * z / k
    return total - np.euler_gamma * nu


def _log_series(nu: float, x: float) -> float:
    """ln of sum_k (x^2/4)^k / (k! (nu+1)_k), the reduced ascending series."""
    q = 0.25 * x * x
    term = 1.0
    tail = 0.0  # sum of the k >= 1 terms
    log_scale = 0.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (nu + k))
        tail += term
        if tail > 1e250:
            tail *= 1e-250
            term *= 1e-250
            log_scale += 250.0 * math.log(10.0)
        # terms are positive; stop once past the peak and negligible
        if k * (nu + k) > q and term <= 1e-17 * tail:
            break
    if log_scale == 0.0:
        return math.log1p(tail)
    return math.log(tail) + log_scale


@lru_cache(maxsize=1)
def _debye_polynomials() -> tuple[Polynomial, ...]:
    # u_{k+1}(p) = p^2 (1-p^2) u_k'(p) / 2 + (1/8) int_0^p (1 - 5 s^2) u_k(s) ds
    u = [Polynomial([1.0])]
    w = Polynomial([1.0, 0.0, -5.0])
    pref = Polynomial([0.0, 0.0, 0.5, 0.0, -0.5])
    for _ in range(_DEBYE_TERMS - 1):
        uk = u[-1]
        nxt = pref * uk.deriv() + (w * uk).integ(lbnd=0.0) / 8.0
        u.append(nxt)
    return tuple(u)


def _log_debye(nu: float, x: float) -> float:
    root = math.hypot(nu, x)
    nu_eta = root + nu * math.log(x / (nu + root))
    p = nu / root
    total = 0.0
    inv = 1.0
    for uk in _debye_polynomials():
        total += uk(p) * inv
        inv /= nu
    return (
        nu_eta
        - 0.5 * math.log(2.0 * math.pi * nu)
        + 0.5 * math.log(p)
        + math.log(total)
    )


def _log_hankel(nu: float, x: float) -> float:
    mu = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    prev = math.inf
    k = 0
    while True:
        k += 1
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if term == 0.0:
            break
        mag = abs(term)
        if mag > prev and (2 * k - 1) ** 2 > mu:
            # asymptotic series started to diverge
            break
        total += term
        if mag < 1e-17 * abs(total):
            break
        prev = mag
    return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(total)


def log_bessel_i(nu: float, x: float) -> float:
    """Natural log of the modified Bessel function I_nu(x).

    Ascending power series for ``x <= max(30, 2 nu)``; above the seam the
    Debye uniform expansion (``nu >= 15``) or the Hankel large-argument
    expansion (smaller orders).
    """
    nu = float(nu)
    x = float(x)
    _check_bessel_args(nu, x)
    if x <= _series_switch(nu):
        return nu * math.log(0.5 * x) - _lgamma1p(nu) + _log_series(nu, x)
    if nu >= DEBYE_MIN_ORDER:
        return _log_debye(nu, x)
    return _log_hankel(nu, x)


def log_bessel_i_reduced(nu: float, x: float) -> float:
    """ln[ I_nu(x) Gamma(nu+1) / (x/2)^nu ], continuous down to x = 0 where it is 0."""
    nu = float(nu)
    x = float(x)
    if not nu >= 0:
        raise DomainError(f"order must be >= 0, got {nu}")
    if x < 0:
        raise DomainError(f"argument must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x <= _series_switch(nu):
        return _log_series(nu, x)
    return log_bessel_i(nu, x) - nu * math.log(0.5 * x) + _lgamma1p(nu)


def _ratio_continued_fraction(v: float, x: float) -> float:
    """I_{v+1}(x)/I_v(x) by the modified Lentz algorithm."""
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    k = 1
    while True:
        b = 2.0 * (v + k) / x
        d = b + d
        if d == 0.0:
            d = tiny
        d = 1.0 / d
        c = b + 1.0 / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return f
        k += 1
        if k > 10_000_000:
            raise ArithmeticError("Bessel ratio continued fraction did not converge")


def bessel_ratio_sequence(nu: float, x: float, count: int) -> np.ndarray:
    """Successive ratios ``I_{nu+m+1}(x) / I_{nu+m}(x)`` for ``m = 0..count-1``.

    The top ratio is seeded by a continued fraction and the rest follow by
    the (stable) downward recurrence ``R_v = x / (2(v+1) + x R_{v+1})``.
    """
    nu = float(nu)
    x = float(x)
    _check_bessel_args(nu, x)
    out = np.empty(count)
    if count == 0:
        return out
    top = count - 1
    out[top] = _ratio_continued_fraction(nu + top, x)
    for m in range(top - 1, -1, -1):
        out[m] = x / (2.0 * (nu + m + 1.0) + x * out[m + 1])
    return out


def bessel_i_ratio(nu: float, ell: int, x: float) -> float:
    """I_{nu+ell}(x) / I_nu(x) in [0, 1], without forming either Bessel value."""
    if ell < 0 or int(ell) != ell:
        raise DomainError(f"ell must be a non-negative integer, got {ell}")
    _check_bessel_args(float(nu), float(x))
    if ell == 0:
        return 1.0
    return float(np.prod(bessel_ratio_sequence(nu, x, int(ell))))


def _check_dim(p: int) -> None:
    if int(p) != p or p < 2:
        raise DomainError(f"dimension p must be an integer >= 2, got {p}")


def legendre_sequence(ell_max: int, p: int, t) -> np.ndarray:
    """[P_0(t), ..., P_{ell_max}(t)] for the dimension-p Legendre polynomials.

    Runs the Gegenbauer recurrence on the normalized polynomials
    (P_l(1) = 1), ``(l+p-2) P_{l+1} = (2l+p-2) t P_l - l P_{l-1}``.
    ``t`` may be an array; the result has shape ``(ell_max+1,) + t.shape``.
    """
    _check_dim(p)
    if ell_max < 0:
        raise DomainError(f"ell_max must be >= 0, got {ell_max}")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("Legendre argument must satisfy |t| <= 1")
    out = np.empty((ell_max + 1,) + t.shape)
    out[0] = 1.0
    if ell_max == 0:
        return out
    out[1] = t
    for ell in range(1, ell_max):
        out[ell + 1] = ((2 * ell + p - 2) * t * out[ell] - ell * out[ell - 1]) / (ell + p - 2)
    return out


def legendre_p(ell: int, p: int, t):
    """Dimension-p Legendre polynomial P_ell(t), normalized so P_ell(1) = 1."""
    return legendre_sequence(ell, p, t)[ell]


def log_sphere_area(p: int) -> float:
    """ln of the surface area of S^{p-1} in R^p, 2 pi^{p/2} / Gamma(p/2)."""
    return math.log(2.0) + 0.5 * p * math.log(math.pi) - math.lgamma(0.5 * p)


def sphere_area(p: int) -> float:
    return math.exp(log_sphere_area(p))


def normalizing_constant(p: int, ell: int) -> float:
    """c_{p,l} = (2l+p-2) Gamma(l+p-2) / (l! Gamma(p-1) area(S^{p-1})).

    These invert the squared norms of the zonal Legendre polynomials, so a
    zonal density is ``sum_l c_{p,l} fhat_l P_l(t)``.
    """
    _check_dim(p)
    if ell < 0:
        raise DomainError(f"ell must be >= 0, got {ell}")
    log_area = log_sphere_area(p)
    if ell == 0:
        return math.exp(-log_area)
    if p == 2:
        # limit of (2l) Gamma(l) / l! as the order parameter vanishes
        return 2.0 * math.exp(-log_area)
    return math.exp(
        math.log(2 * ell + p - 2)
        + math.lgamma(ell + p - 2)
        - math.lgamma(ell + 1)
        - math.lgamma(p - 1)
        - log_area
    )


def normalizing_constants(p: int, ell_max: int) -> np.ndarray:
    """Vector of c_{p,l} for l = 0..ell_max."""
    _check_dim(p)
    ell = np.arange(ell_max + 1, dtype=float)
    log_area = log_sphere_area(p)
    if p == 2:
        out = np.full(ell_max + 1, 2.0)
        out[0] = 1.0
        return out * math.exp(-log_area)
    from scipy.special import gammaln

    logc = np.log(2 * ell + p - 2) + gammaln(ell + p - 2) - gammaln(ell + 1) - math.lgamma(p - 1)
    logc[0] = 0.0
    return np.exp(logc - log_area)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], a: float = -1.0, b: float = 1.0) -> float:
        half = 0.5 * (b - a)
        x = 0.5 * (b + a) + half * self.nodes
        return float(half * np.dot(self.weights, f(x)))


@lru_cache(maxsize=32)
def gauss_legendre(n: int = 256) -> QuadratureRule:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float = -1.0,
    b: float = 1.0,
    n: int = 256,
    tol: float = 1e-12,
    n_max: int = 1 << 15,
) -> float:
    """Gauss-Legendre integral of ``f`` over [a, b], doubling the order until
    two successive estimates agree to ``tol`` (relative, with an absolute floor)."""
    prev = gauss_legendre(n).integrate(f, a, b)
    while n < n_max:
        n *= 2
        cur = gauss_legendre(n).integrate(f, a, b)
        if abs(cur - prev) <= tol * max(abs(cur), 1e-300) or abs(cur - prev) < 1e-300:
            return cur
        prev = cur
    raise ArithmeticError(f"quadrature did not converge to {tol} with {n_max} nodes")


def sphere_integral(g: Callable[[np.ndarray], np.ndarray], p: int, **kwargs) -> float:
    """Integral over S^{p-1} of a zonal function g(mu^T x).

    Uses t = cos(theta): area(S^{p-2}) * int_0^pi g(cos theta) sin^{p-2} theta dtheta,
    which keeps the integrand smooth at the poles for every p.
    """
    _check_dim(p)
    area_sub = 2.0 if p == 2 else sphere_area(p - 1)

    def integrand(theta: np.ndarray) -> np.ndarray:
        return g(np.cos(theta)) * np.sin(theta) ** (p - 2)

    return area_sub * integrate(integrand, 0.0, math.pi, **kwargs)
