"""Test operators for variational inequalities and their problem bundles.

Covers the two Minty test operators (identity and the ``i**2`` diagonal), the
Lagrangian operator of the constrained covering-ball problem, the four-block
saddle operator built from a bilinear coupling, and a Hölder-continuous
fixture.  Each ``*_problem`` constructor wraps an operator together with its
feasible set, monotonicity modulus and any known constants into a
:class:`VIProblem` that the solvers consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .geometry import Ball, Box, Product, as_point, FeasibleSet

LOMAX_SHAPE = 10.0
CHISQ_DF = 3
COVERING_CASES = ("Lomax10", "ChiSq3")


@dataclass(frozen=True, eq=False)
class VIProblem:
    """An operator bundled with its feasible set and known constants.

    ``diag_scale`` is set when the operator is ``x -> diag_scale * x``; on a
    Euclidean ball this lets the solvers dispatch to the fused kernels.
    """

    operator: Callable[[np.ndarray], np.ndarray]
    set: FeasibleSet
    mu: float
    known_L: Optional[float] = None
    known_delta: Optional[float] = None
    known_nu: Optional[float] = None
    known_solution: Optional[np.ndarray] = None
    objective: Optional[Callable[[np.ndarray], float]] = None
    diag_scale: Optional[np.ndarray] = None
    name: str = "vi"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.known_solution is not None:
            object.__setattr__(self, "known_solution", as_point(self.known_solution, self.set.dim))

    @property
    def dim(self) -> int:
        return self.set.dim

    def __call__(self, x):
        return self.operator(x)


# ---------------------------------------------------------------------------
# Minty test operators


def eval_identity(x) -> np.ndarray:
    return np.array(as_point(x), copy=True)


def diag_squares_scale(n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=np.float64)
    return i * i


def eval_diag_squares(x) -> np.ndarray:
    x = as_point(x)
    return diag_squares_scale(x.shape[0]) * x


def _linear_diag_operator(scale: np.ndarray):
    def op(x):
        return scale * x

    return op


def identity_problem(n: int, radius: float = 1.0) -> VIProblem:
    scale = np.ones(n)
    return VIProblem(
        operator=_linear_diag_operator(scale),
        set=Ball(np.zeros(n), radius),
        mu=1.0,
        known_L=1.0,
        known_delta=0.0,
        known_nu=1.0,
        known_solution=np.zeros(n),
        diag_scale=scale,
        name="identity",
        meta={"kappa": 1.0, "radius": radius},
    )


def diag_problem(n: int, radius: float = 1.0) -> VIProblem:
    """``g(x)_i = i**2 x_i`` on a centred ball: ``L = n**2``, ``mu = 1``."""
    scale = diag_squares_scale(n)
    L = float(n) ** 2
    return VIProblem(
        operator=_linear_diag_operator(scale),
        set=Ball(np.zeros(n), radius),
        mu=1.0,
        known_L=L,
        known_delta=0.0,
        known_nu=1.0,
        known_solution=np.zeros(n),
        diag_scale=scale,
        name="diag",
        meta={"kappa": L, "radius": radius},
    )


# ---------------------------------------------------------------------------
# Hölder fixture


def eval_holder(mu: float, L_nu: float, nu: float, x) -> np.ndarray:
    """``mu x + L_nu ||x||**(nu - 1) x``, the gradient of a strongly convex
    function whose nonquadratic part has a ``nu``-Hölder gradient."""
    x = as_point(x)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return np.zeros_like(x)
    return mu * x + L_nu * nrm ** (nu - 1.0) * x


def holder_problem(n: int, mu: float = 1.0, L_nu: float = 1.0, nu: float = 0.5, radius: float = 1.0) -> VIProblem:
    if not (0.0 < nu <= 1.0):
        raise ValueError(f"nu must lie in (0, 1], got {nu}")

    def op(x):
        return eval_holder(mu, L_nu, nu, x)

    return VIProblem(
        operator=op,
        set=Ball(np.zeros(n), radius),
        mu=mu,
        known_L=L_nu,
        known_nu=nu,
        known_solution=np.zeros(n),
        name="holder",
        meta={"L_nu": L_nu, "radius": radius},
    )


# ---------------------------------------------------------------------------
# four-block saddle operator


@dataclass(frozen=True, eq=False)
class SaddleComposite:
    """Lifted saddle problem for ``f(x, y) = x^T A y`` with quadratic ``h, g``.

    Points are concatenations of the blocks ``(x, y, a, b)`` with sizes
    ``(n, m, n, m)``.
    """

    A: np.ndarray
    mu_x: float
    mu_y: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        object.__setattr__(self, "A", A)
        for name in ("mu_x", "mu_y"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {val}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def dim(self) -> int:
        return 2 * (self.n + self.m)

    def split(self, z):
        n, m = self.n, self.m
        return z[:n], z[n : n + m], z[n + m : 2 * n + m], z[2 * n + m :]

    def prox_weights(self) -> np.ndarray:
        """Diagonal Hessian of the companion prox-function."""
        n, m = self.n, self.m
        return np.concatenate(
            [
                np.full(n, self.mu_x),
                np.full(m, self.mu_y),
                np.full(n, 1.0 / (1.0 - self.mu_x)),
                np.full(m, 1.0 / (1.0 - self.mu_y)),
            ]
        )

    def prox_d(self, z) -> float:
        z = as_point(z, self.dim)
        x, y, a, b = self.split(z)
        return (
            self.mu_x * 0.5 * (x @ x)
            + self.mu_y * 0.5 * (y @ y)
            + (a @ a) / (2.0 * (1.0 - self.mu_x))
            + (b @ b) / (2.0 * (1.0 - self.mu_y))
        )

    def bregman(self, u, v) -> float:
        diff = as_point(u, self.dim) - as_point(v, self.dim)
        return 0.5 * float(diff @ (self.prox_weights() * diff))

    def lxy(self) -> float:
        return float(np.linalg.norm(self.A, 2))


def eval_composite(sc: SaddleComposite, z) -> np.ndarray:
    z = as_point(z, sc.dim)
    x, y, a, b = sc.split(z)
    return np.concatenate(
        [
            a + sc.mu_x * x + sc.A @ y,
            -b + sc.mu_y * y - sc.A.T @ x,
            -x + a / (1.0 - sc.mu_x),
            y + b / (1.0 - sc.mu_y),
        ]
    )


def ltilde(delta: float, nu: float, L_xx: float, L_xy: float, L_yy: float, mu_x: float, mu_y: float) -> float:
    """Relative smoothness constant of the four-block operator at inexactness ``delta``."""
    if not (0.0 <= nu <= 1.0):
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    if mu_x <= 0 or mu_y <= 0:
        raise ValueError("mu_x and mu_y must be positive")
    if min(L_xx, L_xy, L_yy) < 0:
        raise ValueError("smoothness constants must be nonnegative")
    expo = (1.0 - nu) / (1.0 + nu)
    if nu < 1.0:
        if not delta > 0:
            raise ValueError("delta must be positive when nu < 1")
        factor = (2.0 / delta) ** expo
    else:
        factor = 1.0
    p = 2.0 / (1.0 + nu)
    return factor * (L_xx**p / mu_x + L_xy**p / np.sqrt(mu_x * mu_y) + L_yy**p / mu_y)


def composite_ltilde(sc: SaddleComposite) -> float:
    """``ltilde`` for the bilinear coupling: ``nu = 1``, ``L_xx = L_yy = 0``."""
    return ltilde(0.0, 1.0, 0.0, sc.lxy(), 0.0, sc.mu_x, sc.mu_y)


def composite_problem(sc: SaddleComposite, radius: float = 1.0) -> VIProblem:
    """The four-block operator in coordinates where its prox is Euclidean.

    With ``H`` the diagonal Hessian of the companion prox-function, the
    substitution ``u = H**0.5 z`` turns the companion divergence into
    ``0.5 * ||u - u'||**2``; the operator becomes ``H**-0.5 g(H**-0.5 u)``
    and keeps modulus 1 and the same smoothness constant.  The feasible set is
    a product of four balls of ``radius`` around the origin in ``u``.
    """
    root = np.sqrt(sc.prox_weights())

    def op(u):
        return eval_composite(sc, u / root) / root

    blocks = [Ball(np.zeros(k), radius) for k in (sc.n, sc.m, sc.n, sc.m)]
    return VIProblem(
        operator=op,
        set=Product(tuple(blocks)),
        mu=1.0,
        known_L=composite_ltilde(sc),
        known_delta=0.0,
        known_nu=1.0,
        known_solution=np.zeros(sc.dim),
        name="composite",
        meta={"to_natural": 1.0 / root, "radius": radius},
    )


# ---------------------------------------------------------------------------
# covering ball with functional constraints


@dataclass(frozen=True, eq=False)
class CoveringBallProblem:
    """min_x max_k ||x - A_k||**2  s.t.  sum_i alpha_pi x_i**2 <= 5, x in X."""

    points_A: np.ndarray
    alpha: np.ndarray
    dual_cap: float = 10.0
    primal_radius: float = 5.0
    seed: Optional[int] = None
    case: Optional[str] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.points_A, dtype=np.float64))
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=np.float64))
        if A.shape[1] != alpha.shape[1]:
            raise ValueError("points and constraint coefficients disagree on n")
        if np.any(alpha < 0):
            raise ValueError("constraint coefficients must be nonnegative")
        if not self.dual_cap > 0:
            raise ValueError("dual cap must be positive")
        object.__setattr__(self, "points_A", A)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.points_A.shape[1]

    @property
    def m(self) -> int:
        return self.alpha.shape[0]

    @property
    def s(self) -> int:
        return self.points_A.shape[0]

    @property
    def primal_set(self) -> Ball:
        return Ball(np.zeros(self.n), self.primal_radius)

    @property
    def dual_set(self) -> Box:
        return Box.uniform(self.m, 0.0, self.dual_cap)

    def sq_dists(self, x) -> np.ndarray:
        diff = self.points_A - x
        return np.einsum("ij,ij->i", diff, diff)

    def psi(self, x) -> float:
        return float(np.max(self.sq_dists(x)))

    def constraints(self, x) -> np.ndarray:
        return self.alpha @ (x * x) - 5.0

    def to_dict(self) -> dict:
        return {
            "dims": {"n": self.n, "m": self.m, "s": self.s},
            "seed": self.seed,
            "case": self.case,
            "points_A": self.points_A.tolist(),
            "alpha": self.alpha.tolist(),
            "dual_cap": self.dual_cap,
            "primal_radius": self.primal_radius,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CoveringBallProblem":
        return cls(
            points_A=np.asarray(doc["points_A"], dtype=np.float64),
            alpha=np.asarray(doc["alpha"], dtype=np.float64),
            dual_cap=float(doc.get("dual_cap", 10.0)),
            primal_radius=float(doc.get("primal_radius", 5.0)),
            seed=doc.get("seed"),
            case=doc.get("case"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CoveringBallProblem":
        return cls.from_dict(json.loads(text))


class CoveringBallEval(NamedTuple):
    x_block: np.ndarray
    lam_block: np.ndarray
    objective: float


def eval_covering_ball(prob: CoveringBallProblem, x, lam, tol: float = 1e-9) -> CoveringBallEval:
    """Lagrangian VI operator ``(d_x psi + sum_p lam_p grad phi_p, -phi)``.

    The farthest point ``A_k*`` picks the subgradient of ``psi``; ties go to
    the smallest index.
    """
    x = as_point(x, prob.n)
    lam = as_point(lam, prob.m)
    if np.any(lam < -tol) or np.any(lam > prob.dual_cap + tol):
        raise ValueError("multipliers lie outside the dual box")
    d2 = prob.sq_dists(x)
    k = int(np.argmax(d2))
    gx = 2.0 * (x - prob.points_A[k]) + 2.0 * (lam @ prob.alpha) * x
    glam = -prob.constraints(x)
    return CoveringBallEval(gx, glam, float(d2[k]))


def covering_ball_problem(prob: CoveringBallProblem, mu: float = 2.0, known_solution=None) -> VIProblem:
    """Stacked ``(x, lam)`` VI; ``mu`` is the modulus of the x-block only."""
    n = prob.n

    def op(z):
        ev = eval_covering_ball(prob, z[:n], z[n:])
        return np.concatenate([ev.x_block, ev.lam_block])

    def objective(z):
        return prob.psi(z[:n])

    return VIProblem(
        operator=op,
        set=Product((prob.primal_set, prob.dual_set)),
        mu=mu,
        known_solution=known_solution,
        objective=objective,
        name="covering_ball",
        meta={"n": n, "m": prob.m, "s": prob.s, "case": prob.case, "seed": prob.seed},
    )


def make_rng(seed: int) -> np.random.Generator:
    """Philox counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample_lomax(rng: np.random.Generator, shape: float, size, scale: float = 1.0) -> np.ndarray:
    u = rng.random(size)
    return scale * ((1.0 - u) ** (-1.0 / shape) - 1.0)


def sample_chisq(rng: np.random.Generator, df: int, size) -> np.ndarray:
    size = (size,) if np.isscalar(size) else tuple(size)
    normals = rng.standard_normal(size + (df,))
    return np.sum(normals * normals, axis=-1)


def gen_covering_ball(seed: int, n: int, m: int, s: int, case: str = "Lomax10", dual_cap: float = 10.0,
                      primal_radius: float = 5.0) -> CoveringBallProblem:
    """Seeded instance; draws the points ``A`` (s x n) first, then ``alpha`` (m x n)."""
    if min(n, m, s) < 1:
        raise ValueError("n, m and s must all be at least 1")
    if case not in COVERING_CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {COVERING_CASES}")
    rng = make_rng(seed)
    points = rng.standard_normal((s, n))
    if case == "Lomax10":
        alpha = sample_lomax(rng, LOMAX_SHAPE, (m, n))
    else:
        alpha = sample_chisq(rng, CHISQ_DF, (m, n))
    return CoveringBallProblem(points, alpha, dual_cap, primal_radius, seed=int(seed), case=case)
