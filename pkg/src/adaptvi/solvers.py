"""Adaptive mirror-prox type solvers for relatively strongly monotone VIs.

Five iteration engines share one doubling line search:

* :func:`ump_solve` -- universal mirror prox (both prox steps anchored at z_k)
* :func:`restarted_solve` -- stages of ``ump_solve`` with shrinking radius
* :func:`adaptive_delta_solve` -- mixed prox step, additive ``delta`` slack
* :func:`adaptive_smooth_solve` -- mixed prox step, no slack
* :func:`adaptive_scaled_delta_solve` -- mixed prox step, ``L * delta`` slack

Every run returns a :class:`Trace`.  For a diagonal linear operator on a ball
the loop runs in a fused numba kernel unless disabled (see :mod:`_accel`).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import kernels
from ._accel import kernels_enabled
from .geometry import Ball, ProxSetup, as_point, max_bregman_radius, start_point
from .operators import VIProblem

L_FLOOR = kernels.L_FLOOR
OUTPUT_MODES = ("last_z", "last_w", "weighted_avg_w")
_MODE_CODE = {"last_z": kernels.OUT_LAST_Z, "last_w": kernels.OUT_LAST_W, "weighted_avg_w": kernels.OUT_WAVG}


class LineSearchError(RuntimeError):
    """Backtracking exhausted its trial cap.

    Usually means the declared ``mu`` does not fit the operator, or the
    operator is too rough for a slack-free acceptance test.  ``trace`` holds
    the iterations completed before the failure, when available.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-3
    delta: float = 0.0
    L0: float = 1.0
    mu: Optional[float] = None
    max_iters: int = 100_000
    max_backtracks_per_iter: int = 60
    output_mode: str = "last_z"
    keep_iterates: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not self.L0 > 0:
            raise ValueError("L0 must be positive")
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.max_iters < 1 or self.max_backtracks_per_iter < 1:
            raise ValueError("iteration caps must be positive")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"output_mode must be one of {OUTPUT_MODES}")


@dataclass(frozen=True)
class RestartConfig:
    R0: float
    epsilon: float
    omega: float = 1.0

    def __post_init__(self):
        if not (self.omega > 0 and self.R0 > 0 and self.epsilon > 0):
            raise ValueError("omega, R0 and epsilon must be positive")

    @property
    def R0sq(self) -> float:
        return self.R0 * self.R0


# stopping rules ------------------------------------------------------------


@dataclass(frozen=True)
class FixedIters:
    n: int


@dataclass(frozen=True)
class BregmanBudget:
    """Stop once ``S_N`` reaches ``target`` (default: max radius / epsilon)."""

    target: Optional[float] = None


@dataclass(frozen=True)
class BoundTarget:
    """Stop once the geometric part of the theoretical bound drops to ``epsilon``."""

    epsilon: Optional[float] = None


def fixed_iters(n: int) -> FixedIters:
    if n < 1:
        raise ValueError("iteration count must be positive")
    return FixedIters(int(n))


def bregman_budget(target: Optional[float] = None) -> BregmanBudget:
    return BregmanBudget(target)


def bound_target(epsilon: Optional[float] = None) -> BoundTarget:
    return BoundTarget(epsilon)


# traces --------------------------------------------------------------------


class TraceRecord(NamedTuple):
    k: int
    i_k: int
    L: float
    S: float
    z: Optional[np.ndarray]
    w: Optional[np.ndarray]
    V_err: float
    norm_err: float
    objective: float
    elapsed: float


class RestartMarker(NamedTuple):
    stage: int
    n_iters: int
    R_sq: float
    S_stage: float


@dataclass
class Trace:
    algorithm: str
    iters: np.ndarray
    trials: np.ndarray
    L: np.ndarray
    S: np.ndarray
    V_err: np.ndarray
    norm_err: np.ndarray
    objective: np.ndarray
    elapsed: np.ndarray
    final: np.ndarray
    z0: np.ndarray
    V0: float = math.nan
    z: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    restart_markers: list = field(default_factory=list)
    status: str = "ok"
    meta: dict = field(default_factory=dict)
    bound_eq: Optional[str] = None
    bound_value: Optional[np.ndarray] = None

    def __len__(self):
        return int(self.iters.shape[0])

    @property
    def records(self) -> list:
        out = []
        for j in range(len(self)):
            out.append(
                TraceRecord(
                    int(self.iters[j]),
                    int(self.trials[j]),
                    float(self.L[j]),
                    float(self.S[j]),
                    None if self.z is None else self.z[j],
                    None if self.w is None else self.w[j],
                    float(self.V_err[j]),
                    float(self.norm_err[j]),
                    float(self.objective[j]),
                    float(self.elapsed[j]),
                )
            )
        return out

    @property
    def n_iters(self) -> int:
        return len(self)

    @property
    def max_L(self) -> float:
        return float(np.max(self.L)) if len(self) else math.nan


class _Recorder:
    """Collects per-iteration columns; array-valued chunks come from kernels."""

    def __init__(self, keep: bool):
        self.keep = keep
        self.cols = {name: [] for name in ("trials", "L", "S", "V_err", "norm_err", "objective", "elapsed")}
        self.z = []
        self.w = []
        self.count = 0
        self.S_offset = 0.0

    def add(self, trial, L, S, V_err, norm_err, objective, elapsed, z, w):
        c = self.cols
        c["trials"].append(np.array([trial], dtype=np.int64))
        c["L"].append(np.array([L]))
        c["S"].append(np.array([S]))
        c["V_err"].append(np.array([V_err]))
        c["norm_err"].append(np.array([norm_err]))
        c["objective"].append(np.array([objective]))
        c["elapsed"].append(np.array([elapsed]))
        if self.keep:
            self.z.append(z[None, :].copy())
            self.w.append(w[None, :].copy())
        self.count += 1

    def add_block(self, trials, L, S, V_err, norm_err, objective, elapsed, zs, ws):
        c = self.cols
        c["trials"].append(np.asarray(trials, dtype=np.int64))
        c["L"].append(np.asarray(L, dtype=np.float64))
        c["S"].append(np.asarray(S, dtype=np.float64))
        c["V_err"].append(np.asarray(V_err, dtype=np.float64))
        c["norm_err"].append(np.asarray(norm_err, dtype=np.float64))
        c["objective"].append(np.asarray(objective, dtype=np.float64))
        c["elapsed"].append(np.asarray(elapsed, dtype=np.float64))
        if self.keep:
            self.z.append(np.asarray(zs))
            self.w.append(np.asarray(ws))
        self.count += len(trials)

    def build(self, algorithm, final, z0, V0, markers, status, meta) -> Trace:
        def cat(name, dtype=np.float64):
            parts = self.cols[name]
            return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)

        n = z0.shape[0]
        z = w = None
        if self.keep:
            z = np.concatenate(self.z) if self.z else np.empty((0, n))
            w = np.concatenate(self.w) if self.w else np.empty((0, n))
        return Trace(
            algorithm=algorithm,
            iters=np.arange(1, self.count + 1, dtype=np.int64),
            trials=cat("trials", np.int64),
            L=cat("L"),
            S=cat("S"),
            V_err=cat("V_err"),
            norm_err=cat("norm_err"),
            objective=cat("objective"),
            elapsed=cat("elapsed"),
            final=final,
            z0=z0,
            V0=V0,
            z=z,
            w=w,
            restart_markers=list(markers),
            status=status,
            meta=meta,
        )


# line search ---------------------------------------------------------------


def line_search(L_prev: float, condition: Callable, step_builder: Callable, cap: int = 60):
    """Find the first ``L = 2**(i-1) * L_prev``, ``i = 0, 1, ...`` that passes.

    ``step_builder(L)`` returns ``(w, z_next)``; ``condition(L, w, z_next)``
    is the acceptance test.  Returns ``(L, i, w, z_next)``.
    """
    if not L_prev > 0:
        raise ValueError("L_prev must be positive")
    for i in range(cap):
        L = max(L_prev * 2.0 ** (i - 1), L_FLOOR)
        w, z_next = step_builder(L)
        if condition(L, w, z_next):
            return L, i, w, z_next
    raise LineSearchError(
        f"line search failed after {cap} trials starting from L={L_prev:g}; "
        "check mu against the operator or allow a positive delta"
    )


def _half_sq(a, b) -> float:
    d = a - b
    return 0.5 * float(d @ d)


def _norm(a) -> float:
    return float(np.sqrt(a @ a))


def _kernel_ok(prob: VIProblem, use_kernels) -> bool:
    return kernels_enabled(use_kernels) and prob.diag_scale is not None and isinstance(prob.set, Ball)


def _check_setup(prob: VIProblem, setup: ProxSetup) -> None:
    if setup.dim != prob.dim:
        raise ValueError(f"prox setup has dimension {setup.dim}, problem has {prob.dim}")


def _resolve_mu(prob: VIProblem, cfg: SolverConfig) -> float:
    return float(cfg.mu if cfg.mu is not None else prob.mu)


def _objective(prob, x) -> float:
    return float(prob.objective(x)) if prob.objective is not None else math.nan


def _apportion(t_start, t_end, count, base):
    if count == 0:
        return np.empty(0)
    return base + (t_end - t_start) * np.arange(1, count + 1) / count


# universal mirror prox -------------------------------------------------------


class _StageResult(NamedTuple):
    z: np.ndarray
    w: np.ndarray
    wsum: np.ndarray
    S: float
    n: int
    L_last: float
    status: int


def _ump_stage(prob, setup, cfg, S_target, n_max, L_prev, rec, t0, use_kernels) -> _StageResult:
    fset = prob.set
    xs = prob.known_solution
    mode = cfg.output_mode
    cap = cfg.max_backtracks_per_iter
    delta = cfg.delta
    z = start_point(setup, fset)

    if _kernel_ok(prob, use_kernels):
        t_a = time.perf_counter()
        has = xs is not None
        out = kernels.ump_diag_ball(
            prob.diag_scale, fset.center, float(fset.radius), np.ascontiguousarray(z, dtype=np.float64),
            xs if has else np.zeros_like(z), has, float(L_prev), float(delta), float(S_target), int(n_max),
            int(cap), _MODE_CODE[mode], bool(cfg.keep_iterates),
        )
        trials, Ls, Ss, Verr, nerr, zs, ws, z_end, w_end, wsum, S, status = out
        t_b = time.perf_counter()
        count = len(trials)
        nan = np.full(count, math.nan)
        S_off = rec.S_offset
        rec.add_block(trials, Ls, Ss + S_off, Verr, nerr, nan, _apportion(t_a, t_b, count, t_a - t0), zs, ws)
        L_last = float(Ls[-1]) if count else L_prev
        return _StageResult(z_end, w_end, wsum, float(S), count, L_last, int(status))

    g = prob.operator
    wsum = np.zeros_like(z)
    w = z
    S = 0.0
    k = 0
    status = 1
    cache = {}
    while k < n_max:
        gz = g(z)

        def build(L):
            w_ = fset.project(z - gz / L)
            gw_ = g(w_)
            cache["gw"] = gw_
            return w_, fset.project(z - gw_ / L)

        def cond(L, w_, zn_):
            gw_ = cache["gw"]
            lhs = float(gz @ (zn_ - z))
            rhs = float(gw_ @ (zn_ - w_)) + float(gz @ (w_ - z)) + L * (_half_sq(w_, z) + _half_sq(zn_, w_)) + delta
            return lhs <= rhs

        try:
            L, i_k, w, z_next = line_search(L_prev, cond, build, cap)
        except LineSearchError:
            status = 2
            break
        S += 1.0 / L
        wsum += w / L
        z = z_next
        k += 1
        if mode == "last_z":
            out_pt = z
        elif mode == "last_w":
            out_pt = w
        else:
            out_pt = wsum / S
        V_err = _half_sq(xs, z) if xs is not None else math.nan
        nerr = _norm(out_pt - xs) if xs is not None else math.nan
        rec.add(i_k, L, S + rec.S_offset, V_err, nerr, _objective(prob, out_pt), time.perf_counter() - t0, z, w)
        L_prev = L
        if S >= S_target:
            status = 0
            break
    return _StageResult(z, w, wsum, S, k, L_prev, status)


def _stage_output(res: _StageResult, mode: str) -> np.ndarray:
    if mode == "last_z" or res.n == 0:
        return res.z.copy()
    if mode == "last_w":
        return res.w.copy()
    return res.wsum / res.S


def _status_text(code: int, fixed: bool) -> str:
    if code == 2:
        return "line_search_failed"
    if code == 1:
        return "ok" if fixed else "max_iters"
    return "ok"


def _meta(cfg: SolverConfig, mu: float, backend: str, **extra) -> dict:
    meta = {
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "L0": cfg.L0,
        "mu": mu,
        "output_mode": cfg.output_mode,
        "max_iters": cfg.max_iters,
        "backend": backend,
    }
    meta.update(extra)
    return meta


def ump_solve(prob: VIProblem, setup: ProxSetup, cfg: SolverConfig, stop=None, use_kernels=None) -> Trace:
    """Universal mirror prox.

    ``stop`` is :func:`bregman_budget` (default; stops once the sum of
    ``1/L`` reaches max radius / epsilon) or :func:`fixed_iters`.
    """
    _check_setup(prob, setup)
    stop = stop if stop is not None else BregmanBudget()
    if isinstance(stop, FixedIters):
        S_target, n_max, fixed = math.inf, min(stop.n, cfg.max_iters), True
    elif isinstance(stop, BregmanBudget):
        target = stop.target if stop.target is not None else max_bregman_radius(setup, prob.set) / cfg.epsilon
        S_target, n_max, fixed = float(target), cfg.max_iters, False
    else:
        raise TypeError(f"unsupported stopping rule for ump_solve: {stop!r}")

    xs = prob.known_solution
    z0 = start_point(setup, prob.set)
    V0 = _half_sq(xs, z0) if xs is not None else math.nan
    rec = _Recorder(cfg.keep_iterates)
    t0 = time.perf_counter()
    backend = "numba" if _kernel_ok(prob, use_kernels) else "numpy"
    res = _ump_stage(prob, setup, cfg, S_target, n_max, cfg.L0, rec, t0, use_kernels)
    status = _status_text(res.status, fixed and res.n == n_max)
    trace = rec.build(
        "alg1_ump", _stage_output(res, cfg.output_mode), z0, V0, [], status,
        _meta(cfg, _resolve_mu(prob, cfg), backend, S_target=S_target if math.isfinite(S_target) else None),
    )
    if status == "line_search_failed":
        raise LineSearchError(f"ump_solve: line search failed at iteration {res.n + 1}", trace)
    return trace


def restarted_solve(prob: VIProblem, cfg: SolverConfig, rcfg: RestartConfig, x0, use_kernels=None) -> Trace:
    """Restarted mirror prox: stages with budget ``omega / mu`` and shrinking radius.

    The accepted L carries over from one stage to the next.  The stage
    output (``cfg.output_mode``) becomes the next prox centre.
    """
    mu = _resolve_mu(prob, cfg)
    x_p = as_point(x0, prob.dim).copy()
    if not prob.set.contains(x_p):
        raise ValueError("restart starting point lies outside the feasible set")
    xs = prob.known_solution
    V0 = _half_sq(xs, x_p) if xs is not None else math.nan
    R_sq = rcfg.R0sq
    stage_budget = rcfg.omega / mu
    stop_at = math.log2(2.0 * rcfg.R0sq / rcfg.epsilon)
    rec = _Recorder(cfg.keep_iterates)
    markers = []
    stage_V = []
    t0 = time.perf_counter()
    L_prev = cfg.L0
    p = 0
    status = "ok"
    backend = "numba" if _kernel_ok(prob, use_kernels) else "numpy"
    while True:
        remaining = cfg.max_iters - rec.count
        if remaining <= 0:
            status = "max_iters"
            break
        setup = ProxSetup(x_p, math.sqrt(R_sq))
        stage_V.append(_half_sq(xs, x_p) if xs is not None else None)
        res = _ump_stage(prob, setup, cfg, stage_budget, remaining, L_prev, rec, t0, use_kernels)
        rec.S_offset += res.S
        markers.append(RestartMarker(p, res.n, R_sq, res.S))
        if res.status == 2:
            status = "line_search_failed"
            break
        if res.status == 1:
            x_p = _stage_output(res, cfg.output_mode)
            status = "max_iters"
            break
        x_p = _stage_output(res, cfg.output_mode)
        L_prev = res.L_last
        R_sq = rcfg.omega * rcfg.R0sq / (2.0 ** (p + 1) * mu * res.S)
        p += 1
        if p > stop_at:
            break
    trace = rec.build(
        "alg2_restart", x_p, as_point(x0, prob.dim).copy(), V0, markers, status,
        _meta(cfg, mu, backend, omega=rcfg.omega, R0=rcfg.R0, restart_epsilon=rcfg.epsilon, stages=len(markers),
              stage_V_err=stage_V),
    )
    if status == "line_search_failed":
        raise LineSearchError(f"restarted_solve: line search failed in stage {p}", trace)
    return trace


# adaptive methods without restarts -------------------------------------------

_EXTRA = {"alg3_delta": kernels.EXTRA_DELTA, "alg4_smooth": kernels.EXTRA_NONE, "alg5_scaled": kernels.EXTRA_SCALED}


def _adaptive(name, prob, setup, cfg, stop, use_kernels) -> Trace:
    _check_setup(prob, setup)
    mu = _resolve_mu(prob, cfg)
    fset = prob.set
    xs = prob.known_solution
    extra = _EXTRA[name]
    delta = cfg.delta
    cap = cfg.max_backtracks_per_iter
    stop = stop if stop is not None else FixedIters(cfg.max_iters)
    z0 = start_point(setup, fset)
    V0 = _half_sq(xs, z0) if xs is not None else math.nan
    if isinstance(stop, FixedIters):
        n_max, stop_eps, V0bar, fixed = min(stop.n, cfg.max_iters), -1.0, 0.0, True
    elif isinstance(stop, BoundTarget):
        n_max, fixed = cfg.max_iters, False
        stop_eps = float(stop.epsilon if stop.epsilon is not None else cfg.epsilon)
        V0bar = V0 if xs is not None else max_bregman_radius(setup, fset)
    else:
        raise TypeError(f"unsupported stopping rule for {name}: {stop!r}")

    rec = _Recorder(cfg.keep_iterates)
    t0 = time.perf_counter()
    use_k = _kernel_ok(prob, use_kernels)
    if use_k:
        has = xs is not None
        out = kernels.adaptive_diag_ball(
            prob.diag_scale, fset.center, float(fset.radius), np.ascontiguousarray(z0, dtype=np.float64),
            xs if has else np.zeros_like(z0), has, float(cfg.L0), mu, float(delta), extra, int(n_max),
            float(stop_eps), float(V0bar), int(cap), bool(cfg.keep_iterates),
        )
        trials, Ls, Ss, Verr, zs, ws, z, w, S, code = out
        t1 = time.perf_counter()
        count = len(trials)
        nerr = np.sqrt(2.0 * Verr)
        rec.add_block(trials, Ls, Ss, Verr, nerr, np.full(count, math.nan), _apportion(t0, t1, count, 0.0), zs, ws)
        k = count
    else:
        g = prob.operator
        z = z0
        S = 0.0
        P = 1.0
        L_prev = cfg.L0
        code = 1
        k = 0
        cache = {}
        while k < n_max:
            gz = g(z)

            def build(L):
                w_ = fset.project(z - gz / L)
                gw_ = g(w_)
                cache["gw"] = gw_
                return w_, fset.project((L * z + mu * w_ - gw_) / (L + mu))

            def cond(L, w_, zn_):
                lhs = float((gz - cache["gw"]) @ (zn_ - w_))
                rhs = L * (_half_sq(w_, z) + _half_sq(zn_, w_))
                if extra == kernels.EXTRA_DELTA:
                    rhs += delta
                elif extra == kernels.EXTRA_SCALED:
                    rhs += L * delta
                return lhs <= rhs

            try:
                L, i_k, w, z_next = line_search(L_prev, cond, build, cap)
            except LineSearchError:
                code = 2
                break
            S += 1.0 / L
            P *= L / (L + mu)
            z = z_next
            k += 1
            V_err = _half_sq(xs, z) if xs is not None else math.nan
            nerr = _norm(z - xs) if xs is not None else math.nan
            rec.add(i_k, L, S, V_err, nerr, _objective(prob, z), time.perf_counter() - t0, z, w)
            L_prev = L
            if stop_eps > 0 and P * V0bar <= stop_eps:
                code = 0
                break

    status = _status_text(int(code), fixed and k == n_max)
    trace = rec.build(
        name, np.array(z, copy=True), z0, V0, [], status,
        _meta(cfg, mu, "numba" if use_k else "numpy", V0bar=V0bar, stop_epsilon=stop_eps),
    )
    if status == "line_search_failed":
        raise LineSearchError(f"{name}: line search failed at iteration {k + 1}", trace)
    return trace


def adaptive_delta_solve(prob: VIProblem, setup: ProxSetup, cfg: SolverConfig, stop=None, use_kernels=None) -> Trace:
    """No-restart method with additive slack ``delta`` in the acceptance test."""
    return _adaptive("alg3_delta", prob, setup, cfg, stop, use_kernels)


def adaptive_smooth_solve(prob: VIProblem, setup: ProxSetup, cfg: SolverConfig, stop=None, use_kernels=None) -> Trace:
    """No-restart method for smooth operators; ignores ``cfg.delta``.

    On operators that are not Lipschitz the test may never pass and the run
    ends with :class:`LineSearchError`.
    """
    return _adaptive("alg4_smooth", prob, setup, cfg, stop, use_kernels)


def adaptive_scaled_delta_solve(prob: VIProblem, setup: ProxSetup, cfg: SolverConfig, stop=None,
                                use_kernels=None) -> Trace:
    """No-restart method whose slack ``L * delta`` grows with the accepted L."""
    return _adaptive("alg5_scaled", prob, setup, cfg, stop, use_kernels)


SOLVERS = {
    "alg1_ump": ump_solve,
    "alg3_delta": adaptive_delta_solve,
    "alg4_smooth": adaptive_smooth_solve,
    "alg5_scaled": adaptive_scaled_delta_solve,
}
