"""Isotropic random walks on S^{p-1} through their Legendre moments.

A rotationally symmetric law about mu is carried as its sequence of
Legendre moments fhat_l = E[P_l(mu^T x)]. Convolution of zonal laws is an
entrywise product of these sequences, and densities are rebuilt from the
zonal series sum_l c_{p,l} fhat_l P_l(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import vmf
from .specfun import DomainError, normalizing_constants, sphere_area
from .sphere import as_unit

__all__ = [
    "SeriesNotConverged",
    "ZonalCoefficients",
    "convolve",
    "walk_coefficients",
    "truncation_order",
    "zonal_series",
    "directional_pdf",
    "projected_pdf",
    "projection_factor",
    "sample_walk",
    "check_unimodality",
    "cosine_quantiles",
]

DEFAULT_TOL = 1e-8
DEFAULT_LMAX = 10_000
_START_ORDER = 32

Extender = Callable[[int], np.ndarray]


class SeriesNotConverged(ArithmeticError):
    """The zonal series tail bound was not reached below the maximum order."""

    def __init__(self, message: str, order: int = -1, tail: float = math.inf):
        super().__init__(message)
        self.order = order
        self.tail = tail


@dataclass(frozen=True)
class ZonalCoefficients:
    """Legendre moments (fhat_0, ..., fhat_L) of a zonal law on S^{p-1}.

    ``extend(L)`` optionally regenerates the sequence to any order L, which
    lets series evaluation raise the truncation order on demand. A mixture
    part (e.g. the continuous part of a scattering law) may have
    ``fhat_0 < 1``; |fhat_l| <= fhat_0 still holds.
    """

    p: int
    coeffs: np.ndarray
    extend: Extender | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if int(self.p) != self.p or self.p < 2:
            raise DomainError(f"dimension p must be an integer >= 2, got {self.p}")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise ValueError("need at least fhat_0")
        if np.any(np.abs(c) > abs(c[0]) + 1e-12):
            raise ValueError("Legendre moments must satisfy |fhat_l| <= fhat_0")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __len__(self) -> int:
        return self.coeffs.size

    def __getitem__(self, ell):
        return self.coeffs[ell]

    def at_order(self, order: int) -> "ZonalCoefficients":
        """Same law truncated or (via ``extend``) extended to ``order``."""
        if order <= self.order:
            return ZonalCoefficients(self.p, self.coeffs[: order + 1], self.extend)
        if self.extend is None:
            raise SeriesNotConverged(
                f"coefficients known only to order {self.order}, {order} requested", self.order
            )
        return ZonalCoefficients(self.p, self.extend(order), self.extend)

    def normalized(self) -> "ZonalCoefficients":
        c0 = self.coeffs[0]
        ext = None if self.extend is None else (lambda L, e=self.extend: e(L) / c0)
        return ZonalCoefficients(self.p, self.coeffs / c0, ext)

    @classmethod
    def uniform(cls, p: int, order: int = 0) -> "ZonalCoefficients":
        def ext(L: int) -> np.ndarray:
            out = np.zeros(L + 1)
            out[0] = 1.0
            return out

        return cls(p, ext(order), ext)

    @classmethod
    def delta(cls, p: int, order: int = 0) -> "ZonalCoefficients":
        """Point mass at mu: every moment equals 1; its series never converges."""

        def ext(L: int) -> np.ndarray:
            return np.ones(L + 1)

        return cls(p, ext(order), ext)

    @classmethod
    def vmf(cls, p: int, kappa: float, order: int = _START_ORDER) -> "ZonalCoefficients":
        def ext(L: int) -> np.ndarray:
            return vmf.fourier_coefficients(p, kappa, L)

        return cls(p, ext(order), ext)

    @classmethod
    def from_function(cls, p: int, fn: Extender, order: int = _START_ORDER) -> "ZonalCoefficients":
        return cls(p, fn(order), fn)

    def tail_bound(self, order: int | None = None) -> float:
        """Estimate of sum_{l > order} c_{p,l} |fhat_l| from the known terms,
        extrapolating geometrically past the last one."""
        L = self.order
        order = L if order is None else order
        a = normalizing_constants(self.p, L) * np.abs(self.coeffs)
        known = float(np.sum(a[order + 1 :])) if order < L else 0.0
        return known + _geometric_tail(a)


def _geometric_tail(a: np.ndarray) -> float:
    last = a[-1]
    if last == 0.0:
        return 0.0
    if a.size < 2 or a[-2] == 0.0:
        return math.inf
    r = last / a[-2]
    if r >= 1.0:
        return math.inf
    return last * r / (1.0 - r)


def _product_extender(exts: Sequence[Extender | None], powers: Sequence[int]) -> Extender | None:
    if any(e is None for e in exts):
        return None

    def ext(L: int) -> np.ndarray:
        out = np.ones(L + 1)
        for e, k in zip(exts, powers):
            out = out * e(L) ** k
        return out

    return ext


def convolve(a: ZonalCoefficients, b: ZonalCoefficients) -> ZonalCoefficients:
    """Double-coset convolution: moments multiply entrywise."""
    if a.p != b.p:
        raise ValueError(f"dimension mismatch: {a.p} vs {b.p}")
    L = min(a.order, b.order)
    ext = _product_extender([a.extend, b.extend], [1, 1])
    return ZonalCoefficients(a.p, a.coeffs[: L + 1] * b.coeffs[: L + 1], ext)


def walk_coefficients(step, n: int | None = None) -> ZonalCoefficients:
    """Moments of the n-step walk.

    ``walk_coefficients(step, n)`` raises identical steps to the n-th power;
    ``walk_coefficients([g1, g2, ...])`` multiplies heterogeneous steps.
    ``n = 0`` gives the point mass at mu.
    """
    if isinstance(step, ZonalCoefficients):
        if n is None or n < 0:
            raise ValueError("n must be a non-negative integer")
        if n == 0:
            return ZonalCoefficients.delta(step.p, step.order)
        ext = _product_extender([step.extend], [n])
        return ZonalCoefficients(step.p, step.coeffs**n, ext)
    steps = list(step)
    if not steps:
        raise ValueError("need at least one step")
    out = steps[0]
    for s in steps[1:]:
        out = convolve(out, s)
    return out


def truncation_order(z: ZonalCoefficients, tol: float = DEFAULT_TOL, max_order: int = DEFAULT_LMAX) -> int:
    """Smallest L with sum_{l > L} c_{p,l} |fhat_l| < tol, raising the known
    order (doubling) while the extrapolated tail is not small enough."""
    cur = z
    while True:
        a = normalizing_constants(cur.p, cur.order) * np.abs(cur.coeffs)
        beyond = _geometric_tail(a)
        if beyond < 0.1 * tol:
            # suffix[L] = sum_{l > L} a_l over the known terms
            suffix = np.concatenate([np.cumsum(a[::-1])[::-1][1:], [0.0]]) + beyond
            return int(np.argmax(suffix < tol))
        if cur.order >= max_order or cur.extend is None:
            raise SeriesNotConverged(
                f"zonal series tail {beyond:.3g} not below {tol:g} by order {cur.order}",
                cur.order,
                beyond,
            )
        cur = cur.at_order(min(2 * cur.order + 1, max_order))


def zonal_series(weights: np.ndarray, p: int, t) -> np.ndarray:
    """sum_l weights[l] P_l(t) without storing the whole Legendre table."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("cosine must satisfy |t| <= 1")
    L = len(weights) - 1
    prev = np.ones_like(t)
    total = weights[0] * prev
    if L == 0:
        return total
    cur = t.copy()
    total = total + weights[1] * cur
    for ell in range(1, L):
        nxt = ((2 * ell + p - 2) * t * cur - ell * prev) / (ell + p - 2)
        total = total + weights[ell + 1] * nxt
        prev, cur = cur, nxt
    return total


def directional_pdf(
    z: ZonalCoefficients,
    t,
    tol: float = DEFAULT_TOL,
    max_order: int = DEFAULT_LMAX,
    order: int | None = None,
):
    """Density on S^{p-1} at any x with mu^T x = t, from the zonal series.

    Truncation negatives are returned as they are, not clamped.
    """
    if order is None:
        order = truncation_order(z, tol, max_order)
    zz = z.at_order(order)
    w = normalizing_constants(z.p, order) * zz.coeffs
    return zonal_series(w, z.p, t)[()]


def projection_factor(p: int, t):
    """Jacobian from the directional density g(t) to the density of the cosine."""
    t = np.asarray(t, dtype=float)
    area_sub = 2.0 if p == 2 else sphere_area(p - 1)
    with np.errstate(divide="ignore"):
        return area_sub * np.clip(1.0 - t * t, 0.0, None) ** (0.5 * (p - 3))


def projected_pdf(z: ZonalCoefficients, t, **kwargs):
    """Density of the cosine t = mu^T x; for p = 3 this is sum (2l+1)/2 fhat_l P_l(t)."""
    return (projection_factor(z.p, t) * directional_pdf(z, t, **kwargs))[()]


def sample_walk(
    kappa: float,
    p: int,
    n: int,
    mu,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Final direction of an n-step vMF walk started at ``mu``.

    Each step is drawn from M_p(x_{k-1}, kappa). Returns a ``(p,)`` vector
    when ``size`` is None, else ``(size, p)``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    mu = as_unit(mu)
    if mu.dim != p:
        raise ValueError("dimension mismatch")
    m = 1 if size is None else size
    x = np.tile(mu.coords, (m, 1))
    for _ in range(n):
        x = vmf.sample_around(x, kappa, rng)
    return x[0] if size is None else x


def check_unimodality(
    z: ZonalCoefficients, grid_size: int = 2001, tol: float = 1e-7, **kwargs
) -> tuple[bool, float]:
    """Is the directional density nondecreasing in t on a uniform grid?

    Returns the verdict and the most negative successive difference
    (0 when the density never decreases).
    """
    t = np.linspace(-1.0, 1.0, grid_size)
    g = directional_pdf(z, t, **kwargs)
    worst = float(min(0.0, np.min(np.diff(g))))
    return worst >= -tol, worst


def cosine_quantiles(density: Callable[[np.ndarray], np.ndarray], p: int, u, n_grid: int = 40_001):
    """Quantiles of t = mu^T x for an unnormalized zonal density g(t).

    Tabulates the CDF over theta = pi s^2, s uniform, which clusters nodes
    near the mode t = 1.
    """
    s = np.linspace(0.0, 1.0, n_grid)
    theta = math.pi * s * s
    t = np.cos(theta)
    f = np.asarray(density(t), dtype=float) * np.sin(theta) ** (p - 2) * 2.0 * math.pi * s
    f = np.clip(f, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(s))])
    cdf /= cdf[-1]
    # CDF in s counts from t = 1 downward
    s_q = np.interp(1.0 - np.asarray(u, dtype=float), cdf, s)
    return np.cos(math.pi * s_q * s_q)
