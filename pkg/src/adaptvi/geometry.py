"""Prox geometry: Euclidean prox-functions, Bregman divergences, projections.

Every prox-function here is the half squared Euclidean norm, possibly
recentred at ``center`` and rescaled by ``scale``::

    d(x) = scale**2 * 0.5 * ||(x - center) / scale||**2 = 0.5 * ||x - center||**2

Recentring and rescaling change ``d`` but never the induced divergence
``V(y, x) = 0.5 * ||y - x||**2``; the restart scheme still carries both for
bookkeeping.  Because the base is Euclidean, both prox subproblems have
closed forms in terms of the Euclidean projection onto the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Euclidean half-squared norm bounded by OMEGA / 2 on the unit ball.
EUCLIDEAN_OMEGA = 1.0


def as_point(x, n=None) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ValueError(f"point must be one-dimensional, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite entries")
    return p


@dataclass(frozen=True, eq=False)
class ProxSetup:
    """Recentred/rescaled Euclidean prox-function."""

    center: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"prox scale must be positive, got {self.scale}")

    @classmethod
    def origin(cls, n: int) -> "ProxSetup":
        return cls(np.zeros(n), 1.0)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def omega(self) -> float:
        return EUCLIDEAN_OMEGA

    def d(self, x) -> float:
        u = (as_point(x, self.dim) - self.center) / self.scale
        return self.scale**2 * 0.5 * float(u @ u)

    def grad_d(self, x) -> np.ndarray:
        return as_point(x, self.dim) - self.center


# ---------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"ball radius must be positive and finite, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def bounded(self) -> bool:
        return True

    def project(self, p: np.ndarray) -> np.ndarray:
        diff = p - self.center
        nrm = np.sqrt(diff @ diff)
        if nrm <= self.radius:
            return p
        return self.center + diff * (self.radius / nrm)

    def contains(self, p, tol=1e-9) -> bool:
        diff = np.asarray(p) - self.center
        return bool(np.sqrt(diff @ diff) <= self.radius * (1 + tol) + tol)

    def max_half_sq_dist(self, z0: np.ndarray) -> float:
        gap = np.linalg.norm(z0 - self.center)
        return 0.5 * (self.radius + gap) ** 2


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds have different lengths")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds contain NaN")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("box is empty")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, n: int, lower: float, upper: float) -> "Box":
        return cls(np.full(n, lower, dtype=np.float64), np.full(n, upper, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def project(self, p: np.ndarray) -> np.ndarray:
        return np.clip(p, self.lower, self.upper)

    def contains(self, p, tol=1e-9) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def max_half_sq_dist(self, z0: np.ndarray) -> float:
        far = np.maximum(np.abs(z0 - self.lower), np.abs(self.upper - z0))
        return 0.5 * float(far @ far)


@dataclass(frozen=True, eq=False)
class Product:
    """Cartesian product of sets over consecutive coordinate blocks."""

    blocks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ValueError("product set needs at least one block")
        object.__setattr__(self, "blocks", blocks)
        offsets = np.cumsum([0] + [b.dim for b in blocks])
        object.__setattr__(self, "_offsets", offsets)

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    @property
    def bounded(self) -> bool:
        return all(b.bounded for b in self.blocks)

    def slices(self):
        return [slice(int(a), int(b)) for a, b in zip(self._offsets[:-1], self._offsets[1:])]

    def split(self, p: np.ndarray) -> list:
        return [p[s] for s in self.slices()]

    def project(self, p: np.ndarray) -> np.ndarray:
        return np.concatenate([b.project(p[s]) for b, s in zip(self.blocks, self.slices())])

    def contains(self, p, tol=1e-9) -> bool:
        p = np.asarray(p)
        return all(b.contains(p[s], tol) for b, s in zip(self.blocks, self.slices()))

    def max_half_sq_dist(self, z0: np.ndarray) -> float:
        return sum(b.max_half_sq_dist(z0[s]) for b, s in zip(self.blocks, self.slices()))


FeasibleSet = Union[Ball, Box, Product]


def unbounded(n: int) -> Box:
    return Box.uniform(n, -np.inf, np.inf)


def nonnegative(n: int) -> Box:
    return Box.uniform(n, 0.0, np.inf)


# ---------------------------------------------------------------------------
# operations


def bregman(setup: ProxSetup, y, x) -> float:
    """``d(y) - d(x) - <grad d(x), y - x>``, i.e. ``0.5 * ||y - x||**2``."""
    y = as_point(y, setup.dim)
    x = as_point(x, setup.dim)
    diff = y - x
    return 0.5 * float(diff @ diff)


def project(fset: FeasibleSet, p) -> np.ndarray:
    p = as_point(p, fset.dim)
    return fset.project(p)


def prox_step(setup: ProxSetup, fset: FeasibleSet, anchor, v, coef: float) -> np.ndarray:
    """argmin over the set of ``<v, x> + coef * V(x, anchor)``."""
    if not coef > 0:
        raise ValueError(f"prox coefficient must be positive, got {coef}")
    anchor = as_point(anchor, fset.dim)
    v = as_point(v, fset.dim)
    return fset.project(anchor - v / coef)


def mixed_prox_step(setup: ProxSetup, fset: FeasibleSet, z_anchor, w_anchor, v, L: float, mu: float) -> np.ndarray:
    """argmin over the set of ``<v/L, z> + V(z, z_anchor) + (mu/L) V(z, w_anchor)``."""
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    z_anchor = as_point(z_anchor, fset.dim)
    w_anchor = as_point(w_anchor, fset.dim)
    v = as_point(v, fset.dim)
    return fset.project((L * z_anchor + mu * w_anchor - v) / (L + mu))


def start_point(setup: ProxSetup, fset: FeasibleSet) -> np.ndarray:
    """Minimizer of the prox-function over the set."""
    return fset.project(setup.center.copy())


def max_bregman_radius(setup: ProxSetup, fset: FeasibleSet) -> float:
    """max over the set of ``V(x, z0)`` with ``z0`` the prox minimizer."""
    if not fset.bounded:
        raise ValueError("max Bregman radius is infinite on an unbounded set")
    if setup.dim != fset.dim:
        raise ValueError(f"dimension mismatch: prox {setup.dim}, set {fset.dim}")
    return float(fset.max_half_sq_dist(start_point(setup, fset)))


def product_of(blocks: Sequence[FeasibleSet]) -> Product:
    return Product(tuple(blocks))
