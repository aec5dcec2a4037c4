"""Monte-Carlo Fisher information and Cramer-Rao bounds for scattering models.

Observations are drawn once from the base model; scores are central finite
differences of the log-likelihood at those fixed observations, and the
information is the empirical mean of score outer products.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import vmf
from .scatter import (
    AsymptoticValidityWarning,
    Fixed,
    NegativeBinomial,
    Poisson,
    ScatteringModel,
    asymptotic_mixture,
    continuous_coefficients,
    sample_process,
)
from .specfun import DomainError
from .walk import directional_pdf, truncation_order

__all__ = [
    "LikelihoodError",
    "FisherEstimationError",
    "ModelFamily",
    "poisson_family",
    "negbin_family",
    "single_step_family",
    "FisherEstimate",
    "log_likelihood",
    "draw_observations",
    "fisher_information",
    "crlb_curve",
    "BACKENDS",
]

log = logging.getLogger(__name__)

BACKENDS = ("exact", "asymptotic")
REL_STEP = 1e-4
MIN_MC_SAMPLES = 10_000
_ATOM_TOL = 1e-12
_SERIES_TOL = 1e-12


class LikelihoodError(ArithmeticError):
    """Non-positive density at an observation (series truncation artifact)."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class FisherEstimationError(ArithmeticError):
    pass


_KINDS = {
    "poisson": ("rho", "lambda_t"),
    "negbin": ("rho", "theta", "xi_t"),
}


@dataclass(frozen=True)
class ModelFamily:
    """A parametrized scattering model.

    ``kind`` is ``poisson``, ``negbin`` or ``single`` (exactly one vMF
    step). The step concentration may be given as ``rho`` (mean resultant
    length) or ``kappa``.
    """

    kind: str
    p: int
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise ValueError("names and values differ in length")
        if self.kind not in ("poisson", "negbin", "single"):
            raise ValueError(f"unknown family {self.kind!r}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def with_value(self, name: str, value: float) -> "ModelFamily":
        """Copy with one parameter changed; ``kappa`` is accepted for a
        ``rho``-parametrized family and converted through A_p."""
        if name == "kappa" and "kappa" not in self.names and "rho" in self.names:
            name, value = "rho", vmf.mean_resultant_length(self.p, value)
        if name not in self.names:
            raise KeyError(name)
        vals = tuple(value if n == name else v for n, v in zip(self.names, self.values))
        return replace(self, values=vals)

    def build(self, values: Sequence[float] | None = None) -> ScatteringModel:
        d = dict(zip(self.names, self.values if values is None else values))
        if "rho" in d:
            rho = d["rho"]
            if not 0.0 < rho < 1.0:
                raise DomainError(f"rho must lie in (0, 1), got {rho}")
            kappa = vmf.concentration_from_rho(self.p, rho)
        else:
            kappa = d["kappa"]
        if self.kind == "poisson":
            counting = Poisson(d["lambda_t"])
        elif self.kind == "negbin":
            counting = NegativeBinomial.from_gamma_cox(d["xi_t"], d["theta"])
        else:
            counting = Fixed(1)
        return ScatteringModel(self.p, counting, kappa=kappa)

    @property
    def kappa(self) -> float:
        d = self.as_dict()
        return d["kappa"] if "kappa" in d else vmf.concentration_from_rho(self.p, d["rho"])


def poisson_family(p: int, rho: float, lambda_t: float) -> ModelFamily:
    return ModelFamily("poisson", p, _KINDS["poisson"], (rho, lambda_t))


def negbin_family(p: int, rho: float, theta: float, xi_t: float) -> ModelFamily:
    return ModelFamily("negbin", p, _KINDS["negbin"], (rho, theta, xi_t))


def single_step_family(p: int, kappa: float | None = None, rho: float | None = None) -> ModelFamily:
    if (kappa is None) == (rho is None):
        raise ValueError("give exactly one of kappa or rho")
    if kappa is not None:
        return ModelFamily("single", p, ("kappa",), (kappa,))
    return ModelFamily("single", p, ("rho",), (rho,))


@dataclass
class FisherEstimate:
    params: tuple[str, ...]
    matrix: np.ndarray
    crlb: np.ndarray
    n_samples: int
    seed: int
    pdf_backend: str
    matrix_se: np.ndarray = field(repr=False, default=None)
    crlb_se: np.ndarray = field(default=None)
    score_mean: np.ndarray = field(default=None)
    score_se: np.ndarray = field(default=None)
    pseudo_inverse: bool = False
    richardson_rel: float = math.nan
    truncation_order: int | None = None
    workers: int = 1

    def as_row(self) -> dict[str, float]:
        row: dict[str, float] = {}
        for i, name in enumerate(self.params):
            row[f"crlb_{name}"] = float(self.crlb[i])
            row[f"crlb_{name}_se"] = float(self.crlb_se[i])
        return row


def _cosines(m: ScatteringModel, x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    return np.clip(xs @ m.mu.coords, -1.0, 1.0)


def _loglik_cosines(
    m: ScatteringModel,
    t: np.ndarray,
    direct: np.ndarray,
    backend: str,
    order: int | None,
) -> np.ndarray:
    out = np.empty(t.shape)
    p0 = m.p0
    out[direct] = math.log(p0) if p0 > 0 else -math.inf
    scat = ~direct
    if not np.any(scat):
        return out
    ts = t[scat]
    if backend == "exact":
        h, _ = continuous_coefficients(m)
        if order is None:
            dens = directional_pdf(h, ts)
        else:
            dens = directional_pdf(h, ts, order=order)
        bad = dens <= 0
        if np.any(bad):
            t_bad = float(ts[np.argmax(bad)])
            raise LikelihoodError(f"non-positive series density at t={t_bad!r}", t_bad)
        out[scat] = np.log(dens)
    elif backend == "asymptotic":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AsymptoticValidityWarning)
            mix = asymptotic_mixture(m)
        out[scat] = mix.log_density(ts)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out


def log_likelihood(
    m: ScatteringModel,
    x,
    direct=None,
    backend: str = "exact",
    order: int | None = None,
):
    """Log-density of observations under the mixed law (atom at mu plus surface measure).

    ``direct`` flags direct paths, which score ln P0; other observations
    score ln of the continuous-part density at t = mu^T x. ``x`` is a unit
    vector or an ``(n, p)`` array of them. Simulated data should pass the
    flag from N(t) = 0; if ``direct`` is None, a cosine within 1e-12 of 1 is
    taken as the atom.
    """
    t = np.atleast_1d(_cosines(m, x))
    if direct is None:
        direct = t >= 1.0 - _ATOM_TOL
    d = np.broadcast_to(np.asarray(direct, dtype=bool), t.shape)
    out = _loglik_cosines(m, t, d, backend, order)
    return out[0] if np.ndim(x) == 1 else out


def _seed_streams(seed: int, workers: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(workers)]


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def draw_observations(
    m: ScatteringModel, count: int, seed: int, workers: int = 1, backend: str = "exact"
) -> tuple[np.ndarray, np.ndarray]:
    """Cosines and direct-path flags of ``count`` draws.

    The exact backend simulates the process; the asymptotic backend draws
    from the vMF mixture, so each backend's information is taken under its
    own law. One independent stream per worker; the result is reproducible
    for a fixed (seed, workers) pair.
    """
    rngs = _seed_streams(seed, workers)
    sizes = _split(count, workers)
    if backend == "asymptotic":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AsymptoticValidityWarning)
            mix = asymptotic_mixture(m)
        draw = mix.sample
    else:
        draw = lambda size, rng: sample_process(m, size, rng)  # noqa: E731

    def run(i: int):
        if sizes[i] == 0:
            return np.empty(0), np.empty(0, dtype=bool)
        x, n = draw(sizes[i], rngs[i])
        return _cosines(m, x), n == 0

    if workers == 1:
        parts = [run(0)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(workers)))
    return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])


def _steps(family: ModelFamily, rel_step: float) -> np.ndarray:
    h = []
    for name, v in zip(family.names, family.values):
        step = rel_step * max(abs(v), 1.0)
        if name == "rho":
            step = min(step, 0.5 * (1.0 - v), 0.5 * v)
        else:
            step = min(step, 0.5 * v)
        h.append(step)
    return np.array(h)


def _scores(
    family: ModelFamily,
    t: np.ndarray,
    direct: np.ndarray,
    steps: np.ndarray,
    backend: str,
    order: int | None,
) -> np.ndarray:
    base = np.array(family.values, dtype=float)
    s = np.empty((t.size, base.size))
    for i in range(base.size):
        up = base.copy()
        dn = base.copy()
        up[i] += steps[i]
        dn[i] -= steps[i]
        lu = _loglik_cosines(family.build(up), t, direct, backend, order)
        ld = _loglik_cosines(family.build(dn), t, direct, backend, order)
        s[:, i] = (lu - ld) / (2.0 * steps[i])
    return s


def _fsum_mean(a: np.ndarray) -> float:
    return math.fsum(a) / a.size


def _atom_score(family: ModelFamily, steps: np.ndarray) -> np.ndarray:
    one = np.ones(1)
    return _scores(family, one, np.ones(1, dtype=bool), steps, "exact", None)[0]


def _mixed_moment(p0: float, s0: np.ndarray, s: np.ndarray) -> np.ndarray:
    """P0 s0 s0^T + (1 - P0) mean(s s^T) with compensated sums."""
    n, d = s.shape
    J = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            J[i, j] = J[j, i] = p0 * s0[i] * s0[j] + (1.0 - p0) * _fsum_mean(s[:, i] * s[:, j])
    return J


def _scattered_scores(family, t, steps, backend, order):
    """Scores at scattered observations; on a series negativity the order is doubled."""
    direct = np.zeros(t.shape, dtype=bool)
    for _ in range(3):
        try:
            return _scores(family, t, direct, steps, backend, order), order
        except LikelihoodError as exc:
            if order is None:
                raise
            log.info("density <= 0 at t=%g with order %d; doubling", exc.t, order)
            order *= 2
    return _scores(family, t, direct, steps, backend, order), order


def fisher_information(
    family: ModelFamily,
    mc_samples: int,
    seed: int = 0,
    backend: str = "exact",
    workers: int = 1,
    rel_step: float = REL_STEP,
    richardson: bool = True,
) -> FisherEstimate:
    """Per-observation Fisher information of ``family`` at its current values.

    The direct-path atom enters with its exact probability and its exact
    score, P0 s0 s0^T; only the continuous part is averaged over the
    scattered draws. Direct-path draws carry no further information and are
    dropped, which removes the variance they would otherwise inject when P0
    is small.
    """
    if mc_samples < MIN_MC_SAMPLES:
        raise ValueError(f"mc_samples must be >= {MIN_MC_SAMPLES}, got {mc_samples}")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    m0 = family.build()
    t, direct = draw_observations(m0, mc_samples, seed, workers, backend)
    t = t[~direct]
    if t.size < 2:
        raise FisherEstimationError("fewer than two scattered draws; increase mc_samples")

    order = None
    if backend == "exact":
        h, _ = continuous_coefficients(m0)
        # one order for every perturbed model, so the differences see no truncation jumps
        order = truncation_order(h, tol=_SERIES_TOL) + 8

    steps = _steps(family, rel_step)
    p0 = m0.p0
    s0 = _atom_score(family, steps) if p0 > 0 else np.zeros(len(steps))
    s, order = _scattered_scores(family, t, steps, backend, order)
    n, d = s.shape
    J = _mixed_moment(p0, s0, s)
    outer = (s[:, :, None] * s[:, None, :]).reshape(n, -1)
    J_se = (1.0 - p0) * outer.std(axis=0, ddof=1).reshape(d, d) / math.sqrt(n)

    richardson_rel = math.nan
    if richardson:
        s2, _ = _scattered_scores(family, t, 0.5 * steps, backend, order)
        s02 = _atom_score(family, 0.5 * steps) if p0 > 0 else s0
        J2 = _mixed_moment(p0, s02, s2)
        richardson_rel = float(np.max(np.abs(J2 - J)) / np.max(np.abs(J)))

    evals, evecs = np.linalg.eigh(J)
    trace = float(np.trace(J))
    if evals.min() < -1e-8 * abs(trace):
        raise FisherEstimationError(
            f"information estimate not PSD (min eigenvalue {evals.min():.3g}); increase mc_samples"
        )
    pseudo = bool(evals.max() <= 0 or evals.min() <= evals.max() * 1e-12)
    if pseudo:
        keep = evals > max(evals.max(), 0.0) * 1e-12
        inv_vals = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
        log.warning("information matrix ill-conditioned; using the pseudo-inverse")
    else:
        inv_vals = 1.0 / evals
    J_inv = (evecs * inv_vals) @ evecs.T
    crlb = np.diag(J_inv).copy()
    # delta method: the CRLB estimate moves by -(1-P0) (u_i^2 - E u_i^2) / n per draw
    u = s @ J_inv
    crlb_se = (1.0 - p0) * (u * u).std(axis=0, ddof=1) / math.sqrt(n)

    est = FisherEstimate(
        params=family.names,
        matrix=J,
        crlb=crlb,
        n_samples=mc_samples,
        seed=seed,
        pdf_backend=backend,
        matrix_se=J_se,
        crlb_se=crlb_se,
        score_mean=p0 * s0 + (1.0 - p0) * s.mean(axis=0),
        score_se=(1.0 - p0) * s.std(axis=0, ddof=1) / math.sqrt(n),
        pseudo_inverse=pseudo,
        richardson_rel=richardson_rel,
        truncation_order=order,
        workers=workers,
    )
    log.info("fisher %s %s: crlb=%s richardson=%.2e", family.kind, family.as_dict(), crlb, richardson_rel)
    return est


def crlb_curve(
    family: ModelFamily,
    sweep: str,
    values: Sequence[float],
    mc_samples: int,
    seed: int = 0,
    backend: str = "exact",
    workers: int = 1,
) -> list[dict]:
    """CRLBs along a one-parameter sweep. Failed points are recorded and skipped."""
    rows = []
    for v in values:
        row: dict = {sweep: float(v), "backend": backend, "error": ""}
        try:
            fam = family.with_value(sweep, v)
            est = fisher_information(fam, mc_samples, seed, backend, workers)
            row.update(est.as_row())
        except (ArithmeticError, ValueError) as exc:
            log.warning("sweep point %s=%g failed: %s", sweep, v, exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
