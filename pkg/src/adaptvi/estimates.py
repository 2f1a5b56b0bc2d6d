"""Closed-form convergence bounds evaluated on an accepted-L history.

The adaptive bounds are all of the form ``P_k V0 + delta * (weighted sum)``
where ``P_k = prod_i (1 + mu / L_i)**-1``.  ``bound_path`` evaluates them for
every prefix of the history with the one-step recursions

    eq19:     B_k = q_k B_{k-1} + delta / (L_k + mu)
    eq23:     B_k = P_k V0 + delta T_k,   T_k = 1 + q_k T_{k-1}
    remark6:  B_k = q_k (B_{k-1} + delta)

with ``q_k = L_k / (L_k + mu)`` and ``B_0 = V0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ADAPTIVE_VARIANTS = ("eq19", "eq20", "eq21", "eq23", "eq25", "remark6")


@dataclass(frozen=True)
class LHistory:
    L_values: tuple
    mu: float
    delta: float
    V0: float

    def __post_init__(self):
        vals = tuple(float(v) for v in np.asarray(self.L_values, dtype=np.float64).reshape(-1))
        if any(not (v > 0) for v in vals):
            raise ValueError("accepted L values must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.delta < 0 or self.V0 < 0:
            raise ValueError("delta and V0 must be nonnegative")
        object.__setattr__(self, "L_values", vals)


def bound_ump_gap(L: float, V0: float, N: int) -> float:
    if N < 1:
        raise ValueError("N must be at least 1")
    return 2.0 * L * V0 / N


def bound_lemma2_drift(V0: float, delta: float, S_N: float) -> float:
    if S_N < 0:
        raise ValueError("S_N must be nonnegative")
    return V0 + delta * S_N


def restart_stage_count(R0sq: float, epsilon: float) -> int:
    """Number of stages before ``p > log2(2 R0**2 / eps)`` stops the restart loop."""
    top = math.log2(2.0 * R0sq / epsilon)
    if top < 0:
        return 1
    return int(math.floor(top)) + 1


def bound_restart(L: float, omega: float, mu: float, delta: float, R0sq: float, epsilon: float):
    """Returns ``(quality, iterations)`` guaranteed for the restarted method."""
    quality = epsilon + 2.0 * omega * L * delta / mu**2
    if epsilon >= R0sq:
        return quality, 0
    iters = math.ceil((2.0 * L * omega / mu) * math.log2(R0sq / epsilon))
    return quality, int(iters)


def bound_path(L_values: Sequence[float], mu: float, delta: float, V0: float, variant: str) -> np.ndarray:
    """Bound after each iteration ``k = 1..len(L_values)``."""
    if variant not in ADAPTIVE_VARIANTS:
        raise ValueError(f"unknown bound variant {variant!r}")
    L = np.asarray(L_values, dtype=np.float64)
    if L.size == 0:
        return np.empty(0)
    if np.any(L <= 0):
        raise ValueError("accepted L values must be positive")
    k = np.arange(1, L.size + 1)
    if variant in ("eq21", "eq25"):
        Lhat = np.maximum.accumulate(L)
        geo = (1.0 + mu / (2.0 * Lhat)) ** (-k) * V0
        if variant == "eq21":
            return geo
        return geo + delta * (1.0 + 2.0 * Lhat / mu)

    q = L / (L + mu)
    out = np.empty(L.size)
    if variant == "eq20":
        return np.cumprod(q) * V0
    if variant == "eq23":
        P = np.cumprod(q)
        T = 0.0
        for i in range(L.size):
            T = 1.0 + q[i] * T
            out[i] = P[i] * V0 + delta * T
        return out
    B = V0
    for i in range(L.size):
        if variant == "eq19":
            B = q[i] * B + delta / (L[i] + mu)
        else:  # remark6
            B = q[i] * (B + delta)
        out[i] = B
    return out


def bound_adaptive(hist: LHistory, variant: str) -> float:
    """Bound on ``V(z*, z_{k+1})`` after the full history ``L_1..L_{k+1}``.

    ``eq21`` and ``eq25`` take their single constant as the largest accepted L.
    """
    if not hist.L_values:
        raise ValueError("history is empty")
    return float(bound_path(hist.L_values, hist.mu, hist.delta, hist.V0, variant)[-1])


def geometric_factor(L_values: Sequence[float], mu: float) -> float:
    L = np.asarray(L_values, dtype=np.float64)
    return float(np.prod(L / (L + mu)))


def bound_external_comparison(L_xy: float, L_xx: float, mu_y: float, D: float, omega: float, epsilon: float,
                              R0sq: float, nu_grid: Sequence[float], mu: float | None = None) -> float:
    """Iteration estimate of the universal-method alternative, minimized over ``nu_grid``.

    The factor ``(1 - nu)(2 - nu)/(2 - nu)`` inside ``L_nu`` is evaluated as
    written even though it cancels to ``1 - nu``.  ``mu`` defaults to ``mu_y``.
    """
    grid = list(nu_grid)
    if not grid:
        raise ValueError("nu grid is empty")
    if mu is None:
        mu = mu_y
    best = math.inf
    for nu in grid:
        if not (0.0 <= nu <= 1.0):
            raise ValueError(f"nu must lie in [0, 1], got {nu}")
        Lt = L_xy * (2.0 * L_xy / mu_y) ** (nu / (2.0 - nu)) + L_xx * D ** ((nu - nu * nu) / (2.0 - nu))
        base = Lt / (2.0 * epsilon) * ((1.0 - nu) * (2.0 - nu) / (2.0 - nu))
        L_nu = Lt * base ** ((1.0 - nu) * (1.0 + nu) / (2.0 - nu))
        p = 2.0 / (1.0 + nu)
        val = (L_nu / mu) ** p * 2.0**p * omega / epsilon ** ((1.0 - nu) / (1.0 + nu)) * math.log2(2.0 * R0sq / epsilon)
        best = min(best, math.ceil(val))
    return float(best)
