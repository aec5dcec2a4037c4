"""Geometry of the hypersphere S^{p-1}: unit vectors, the tangent-normal
decomposition x = t mu + sqrt(1 - t^2) xi, and uniform draws on mu^perp."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UnitVector",
    "TangentNormal",
    "as_unit",
    "north_pole",
    "decompose",
    "recompose",
    "sample_normal_subsphere",
    "riemannian_distance",
    "uniform_sphere",
]

_RENORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class UnitVector:
    """A point on S^{p-1}. Near-unit input is renormalized; anything further
    than 1e-9 from unit length is rejected."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size < 2:
            raise ValueError("a unit vector needs dimension p >= 2")
        norm = float(np.linalg.norm(c))
        if not abs(norm - 1.0) <= _RENORM_TOL:
            raise ValueError(f"not a unit vector (norm {norm!r})")
        c = c / norm
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitVector):
            return NotImplemented
        return self.dim == other.dim and bool(np.all(self.coords == other.coords))

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    def __repr__(self) -> str:
        return f"UnitVector({self.coords.tolist()})"


def as_unit(x) -> UnitVector:
    return x if isinstance(x, UnitVector) else UnitVector(np.asarray(x, dtype=float))


def north_pole(p: int) -> UnitVector:
    e = np.zeros(p)
    e[-1] = 1.0
    return UnitVector(e)


@dataclass(frozen=True)
class TangentNormal:
    """Cosine part ``t`` and normal direction ``xi`` of x about an axis.

    ``xi_defined`` is False when x = +-mu; ``xi`` is then an arbitrary unit
    vector of mu^perp and must not be relied upon.
    """

    t: float
    xi: UnitVector
    xi_defined: bool = True


def _any_perpendicular(mu: np.ndarray) -> np.ndarray:
    k = int(np.argmin(np.abs(mu)))
    e = np.zeros_like(mu)
    e[k] = 1.0
    v = e - np.dot(e, mu) * mu
    return v / np.linalg.norm(v)


def decompose(x, mu) -> TangentNormal:
    x = as_unit(x)
    mu = as_unit(mu)
    if x.dim != mu.dim:
        raise ValueError("dimension mismatch")
    m = mu.coords
    t = float(np.clip(np.dot(m, x.coords), -1.0, 1.0))
    resid = x.coords - t * m
    norm = float(np.linalg.norm(resid))
    if abs(t) >= 1.0 - 1e-12 or norm < 1e-12:
        return TangentNormal(t, UnitVector(_any_perpendicular(m)), xi_defined=False)
    return TangentNormal(t, UnitVector(resid / norm))


def recompose(tn: TangentNormal, mu) -> UnitVector:
    mu = as_unit(mu)
    t = min(1.0, max(-1.0, tn.t))
    v = t * mu.coords + math.sqrt(1.0 - t * t) * tn.xi.coords
    return UnitVector(v / np.linalg.norm(v))


def sample_normal_subsphere(mu, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draws on mu^perp intersected with S^{p-1} (a copy of S^{p-2}).

    ``mu`` may be a single axis or an ``(m, p)`` array of axes, one per draw.
    Gaussian vector, project out the axis, normalize. For p = 2 this picks
    one of the two perpendicular directions with probability 1/2 each.
    """
    axes = np.asarray(mu, dtype=float)
    single_axis = axes.ndim == 1
    if single_axis:
        n = 1 if size is None else size
        axes_b = np.broadcast_to(axes, (n, axes.size))
    else:
        if size is not None and size != axes.shape[0]:
            raise ValueError("size disagrees with the number of axes")
        axes_b = axes
    n, p = axes_b.shape
    if p == 2:
        perp = np.stack([-axes_b[:, 1], axes_b[:, 0]], axis=1)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        out = perp * sign[:, None]
    else:
        out = np.empty((n, p))
        todo = np.arange(n)
        while todo.size:
            z = rng.standard_normal((todo.size, p))
            a = axes_b[todo]
            z -= np.sum(z * a, axis=1, keepdims=True) * a
            norm = np.linalg.norm(z, axis=1)
            ok = norm > 1e-12
            out[todo[ok]] = z[ok] / norm[ok, None]
            todo = todo[~ok]
    if single_axis and size is None:
        return out[0]
    return out


def riemannian_distance(x, y) -> float:
    """Geodesic angle arccos(x^T y) in [0, pi], dot product clamped first."""
    x = as_unit(x)
    y = as_unit(y)
    if x.dim != y.dim:
        raise ValueError("dimension mismatch")
    return float(np.arccos(np.clip(np.dot(x.coords, y.coords), -1.0, 1.0)))


def uniform_sphere(p: int, size: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((size, p))
    norm = np.linalg.norm(z, axis=1, keepdims=True)
    return z / norm
