"""Compound Cox multiple scattering on S^{p-1}.

After N(t) isotropic scattering events the direction x_t is a mixture of an
atom at mu (no event, probability P0) and the n-step walk laws weighted by
P[N(t) = n]. Its Legendre moments are the probability generating function
of N(t) evaluated at the step moments, E[P_l(mu^T x_t)] = G(fhat_l).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import vmf
from .specfun import DomainError
from .sphere import UnitVector, as_unit, north_pole
from .walk import DEFAULT_LMAX, DEFAULT_TOL, ZonalCoefficients, directional_pdf, projection_factor

__all__ = [
    "CountingModel",
    "Poisson",
    "NegativeBinomial",
    "Fixed",
    "ScatteringModel",
    "AsymptoticValidityWarning",
    "VmfMixture",
    "count_weights",
    "pgf",
    "legendre_moments",
    "continuous_coefficients",
    "scattering_pdf",
    "sample_process",
    "asymptotic_mixture",
    "equivalent_concentration",
]

WEIGHT_TAIL_TOL = 1e-12


class AsymptoticValidityWarning(UserWarning):
    """The vMF mixture is used where kappa / n is too small to be reliable."""


class CountingModel:
    """Law of the number of scattering events N(t)."""

    def log_weights(self, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tail_ratio_bound(self, n: np.ndarray) -> np.ndarray:
        """Upper bound on w_{k+1}/w_k for every k >= n."""
        raise NotImplementedError

    def pgf(self, z):
        raise NotImplementedError

    def pgf_minus_p0(self, z):
        """G(z) - G(0), computed without cancellation."""
        raise NotImplementedError

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def p0(self) -> float:
        return float(self.pgf(0.0))

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def weights(self, n_max: int | None = None, tail_tol: float = WEIGHT_TAIL_TOL) -> np.ndarray:
        """[P(N=0), ..., P(N=n_max)]; with ``n_max=None`` the length is chosen so
        the omitted tail is certified below ``tail_tol``."""
        if n_max is not None:
            if n_max < 0:
                raise ValueError("n_max must be >= 0")
            return np.exp(self.log_weights(np.arange(n_max + 1)))
        guess = max(16, int(2 * self.mean) + 16)
        while True:
            n = np.arange(guess + 1)
            lw = self.log_weights(n)
            w = np.exp(lw)
            r = self._tail_ratio_bound(n)
            with np.errstate(divide="ignore", invalid="ignore"):
                bound = np.where(r < 1.0, w * r / (1.0 - r), np.inf)
            ok = np.nonzero(bound < tail_tol)[0]
            if ok.size:
                return w[: ok[0] + 1]
            guess *= 2


@dataclass(frozen=True)
class Poisson(CountingModel):
    """Homogeneous Poisson count with mean lambda_t = lambda * t."""

    lambda_t: float

    def __post_init__(self) -> None:
        if not self.lambda_t > 0:
            raise DomainError(f"lambda_t must be > 0, got {self.lambda_t}")

    def log_weights(self, n):
        n = np.asarray(n, dtype=float)
        return -self.lambda_t + n * math.log(self.lambda_t) - gammaln(n + 1.0)

    def _tail_ratio_bound(self, n):
        return self.lambda_t / (np.asarray(n, dtype=float) + 1.0)

    def pgf(self, z):
        return np.exp(-self.lambda_t * (1.0 - np.asarray(z, dtype=float)))[()]

    def pgf_minus_p0(self, z):
        return (math.exp(-self.lambda_t) * np.expm1(self.lambda_t * np.asarray(z, dtype=float)))[()]

    def sample(self, size, rng):
        return rng.poisson(self.lambda_t, size)

    @property
    def mean(self) -> float:
        return self.lambda_t


@dataclass(frozen=True)
class NegativeBinomial(CountingModel):
    """NB(r_t, q): P(N=n) = Gamma(n+r)/(n! Gamma(r)) (1-q)^r q^n.

    This is the Cox count with Gamma(xi t, rate theta) intensity, with
    r_t = xi t and q = 1/(theta+1).
    """

    r_t: float
    q: float

    def __post_init__(self) -> None:
        if not self.r_t > 0:
            raise DomainError(f"r_t must be > 0, got {self.r_t}")
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")

    @classmethod
    def from_gamma_cox(cls, xi_t: float, theta: float) -> "NegativeBinomial":
        if not theta > 0:
            raise DomainError(f"theta must be > 0, got {theta}")
        return cls(xi_t, 1.0 / (theta + 1.0))

    @property
    def xi_t(self) -> float:
        return self.r_t

    @property
    def theta(self) -> float:
        return (1.0 - self.q) / self.q

    def log_weights(self, n):
        n = np.asarray(n, dtype=float)
        r = self.r_t
        return (
            gammaln(n + r) - gammaln(r) - gammaln(n + 1.0)
            + r * math.log1p(-self.q) + n * math.log(self.q)
        )

    def _tail_ratio_bound(self, n):
        n = np.asarray(n, dtype=float)
        # w_{k+1}/w_k = q (k+r)/(k+1): decreasing in k when r > 1, else below q
        return self.q * np.maximum((n + self.r_t) / (n + 1.0), 1.0)

    def pgf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(self.r_t * (math.log1p(-self.q) - np.log1p(-self.q * z)))[()]

    def pgf_minus_p0(self, z):
        z = np.asarray(z, dtype=float)
        return ((1.0 - self.q) ** self.r_t * np.expm1(-self.r_t * np.log1p(-self.q * z)))[()]

    def sample(self, size, rng):
        lam = rng.gamma(self.r_t, self.q / (1.0 - self.q), size)
        return rng.poisson(lam)

    @property
    def mean(self) -> float:
        return self.r_t * self.q / (1.0 - self.q)


@dataclass(frozen=True)
class Fixed(CountingModel):
    """Degenerate count N = n with probability one."""

    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 0:
            raise DomainError(f"n must be a non-negative integer, got {self.n}")

    def log_weights(self, n):
        n = np.asarray(n)
        return np.where(n == self.n, 0.0, -np.inf)

    def _tail_ratio_bound(self, n):
        return np.where(np.asarray(n) >= self.n, 0.0, np.inf)

    def pgf(self, z):
        return (np.asarray(z, dtype=float) ** self.n)[()]

    def pgf_minus_p0(self, z):
        z = np.asarray(z, dtype=float)
        return (z**self.n if self.n > 0 else np.zeros_like(z))[()]

    def sample(self, size, rng):
        return np.full(size, self.n, dtype=np.int64)

    @property
    def mean(self) -> float:
        return float(self.n)


def count_weights(c: CountingModel, n_max: int | None = None) -> np.ndarray:
    return c.weights(n_max)


def pgf(c: CountingModel, z):
    """E[z^N]; equals the Laplace transform of the mixing intensity at 1 - z."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > 1.0):
        raise DomainError("pgf argument must satisfy |z| <= 1")
    return c.pgf(z)


@dataclass(frozen=True)
class ScatteringModel:
    """Direction after N(t) i.i.d. isotropic steps from mu.

    Steps are vMF with concentration ``kappa`` unless a generic zonal
    ``step`` law is given (analysis only; sampling needs vMF steps).
    """

    p: int
    counting: CountingModel
    kappa: float | None = None
    step: ZonalCoefficients | None = None
    mu: UnitVector | None = None

    def __post_init__(self) -> None:
        if (self.kappa is None) == (self.step is None):
            raise ValueError("give exactly one of kappa or step")
        if self.kappa is not None and not self.kappa > 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if self.step is not None and self.step.p != self.p:
            raise ValueError("step dimension mismatch")
        mu = north_pole(self.p) if self.mu is None else as_unit(self.mu)
        if mu.dim != self.p:
            raise ValueError("mu dimension mismatch")
        object.__setattr__(self, "mu", mu)

    def step_moments(self, ell_max: int) -> np.ndarray:
        if self.kappa is not None:
            return vmf.fourier_coefficients(self.p, self.kappa, ell_max)
        return self.step.at_order(ell_max).coeffs

    @property
    def p0(self) -> float:
        return self.counting.p0


def legendre_moments(m: ScatteringModel, ell_max: int) -> np.ndarray:
    """E[P_l(mu^T x_t)] = G(fhat_l) for l = 0..ell_max (atom included)."""
    return np.atleast_1d(m.counting.pgf(m.step_moments(ell_max)))


def continuous_coefficients(
    m: ScatteringModel, ell_max: int = 32
) -> tuple[ZonalCoefficients, float]:
    """Moments of the unnormalized continuous part, h_l = G(fhat_l) - G(0),
    together with the atom mass P0 = G(0)."""

    def ext(L: int) -> np.ndarray:
        return np.atleast_1d(m.counting.pgf_minus_p0(m.step_moments(L)))

    return ZonalCoefficients(m.p, ext(ell_max), ext), m.p0


def scattering_pdf(
    m: ScatteringModel, t, tol: float = DEFAULT_TOL, max_order: int = DEFAULT_LMAX
) -> tuple[float, np.ndarray]:
    """(P0, continuous density at cosine t). The atom is never folded into the density."""
    h, p0 = continuous_coefficients(m)
    return p0, directional_pdf(h, t, tol=tol, max_order=max_order)


def sample_process(
    m: ScatteringModel, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` directions x_t and their event counts N(t)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if m.kappa is None:
        raise NotImplementedError("sampling is implemented for vMF steps only")
    n_events = np.asarray(m.counting.sample(count, rng), dtype=np.int64)
    x = np.tile(m.mu.coords, (count, 1))
    for k in range(1, int(n_events.max(initial=0)) + 1):
        active = n_events >= k
        x[active] = vmf.sample_around(x[active], m.kappa, rng)
    return x, n_events


def equivalent_concentration(kappa: float, n):
    """Concentration of the vMF that matches the n-step vMF walk for large kappa."""
    return (kappa - 0.5) / np.asarray(n, dtype=float) + 0.5


@dataclass(frozen=True)
class VmfMixture:
    """Atom at mu plus sum_n w_n M_p(mu, kappa_n): the high-concentration
    stand-in for the scattering law."""

    p: int
    mu: UnitVector
    mass: float
    n: np.ndarray
    weights: np.ndarray
    kappas: np.ndarray
    _log_norm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        lc = np.array([vmf.log_normalizer(self.p, k) for k in self.kappas])
        object.__setattr__(self, "_log_norm", lc)

    def log_density(self, t):
        """ln of the continuous-part density (unnormalized, total mass 1 - P0)."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights) + self._log_norm
        terms = lw[:, None] + self.kappas[:, None] * t.reshape(1, -1)
        return logsumexp(terms, axis=0).reshape(t.shape)[()]

    def density(self, t):
        return np.exp(self.log_density(t))

    def projected_density(self, t):
        return (projection_factor(self.p, t) * self.density(t))[()]

    def legendre_moments(self, ell_max: int) -> np.ndarray:
        """Moments of the continuous part, sum_n w_n fhat_l(kappa_n)."""
        out = np.zeros(ell_max + 1)
        for w, k in zip(self.weights, self.kappas):
            out += w * vmf.fourier_coefficients(self.p, k, ell_max)
        return out

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        probs = np.concatenate([[self.mass], self.weights])
        probs = probs / probs.sum()
        comp = rng.choice(probs.size, size=count, p=probs)
        x = np.tile(self.mu.coords, (count, 1))
        n_out = np.zeros(count, dtype=np.int64)
        for j in range(1, probs.size):
            sel = comp == j
            if np.any(sel):
                x[sel] = vmf.sample_around(x[sel], float(self.kappas[j - 1]), rng)
                n_out[sel] = self.n[j - 1]
        return x, n_out


def asymptotic_mixture(m: ScatteringModel, weight_tol: float = 1e-10) -> VmfMixture:
    """Replace each n-step component by M_p(mu, (kappa - 1/2)/n + 1/2), keeping
    components until the cumulative count probability reaches 1 - weight_tol."""
    if m.kappa is None:
        raise ValueError("the asymptotic mixture needs vMF steps")
    if not 0.0 < weight_tol < 1.0:
        raise ValueError("weight_tol must lie in (0, 1)")
    w = m.counting.weights()
    cum = np.cumsum(w)
    n_star = int(np.argmax(cum >= 1.0 - weight_tol)) if cum[-1] >= 1.0 - weight_tol else w.size - 1
    n_star = max(n_star, 1)
    n = np.arange(1, n_star + 1)
    keep = w[1 : n_star + 1] > 0
    if m.kappa / n_star < 10.0:
        warnings.warn(
            f"kappa/N* = {m.kappa / n_star:.3g} < 10: the vMF mixture is only a rough approximation",
            AsymptoticValidityWarning,
            stacklevel=2,
        )
    return VmfMixture(
        p=m.p,
        mu=m.mu,
        mass=float(w[0]),
        n=n[keep],
        weights=w[1 : n_star + 1][keep],
        kappas=equivalent_concentration(m.kappa, n[keep]),
    )
