"""Experiment runner: seeded problems, solver sweeps, trace files.

A run is described by an :class:`ExperimentConfig` (loadable from JSON) and
produces one trace per ``(solver, epsilon)`` pair.  Traces are written as CSV
(fixed column set, plus a ``.meta.json`` sidecar carrying the header) or as a
single JSON document.

Random draws use numpy's Philox counter-based generator keyed by the config
seed, so a ``(config, seed)`` pair fully determines every trace body.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .estimates import bound_path
from .geometry import ProxSetup, max_bregman_radius, start_point
from .operators import (
    SaddleComposite,
    VIProblem,
    composite_problem,
    covering_ball_problem,
    diag_problem,
    gen_covering_ball,
    holder_problem,
    identity_problem,
    make_rng,
)
from .solvers import (
    LineSearchError,
    RestartConfig,
    SolverConfig,
    Trace,
    RestartMarker,
    adaptive_delta_solve,
    adaptive_scaled_delta_solve,
    adaptive_smooth_solve,
    bound_target,
    restarted_solve,
    ump_solve,
)

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "ADAPTVI_OUTPUT_DIR"
SOLVER_NAMES = ("alg1_ump", "alg2_restart", "alg3_delta", "alg4_smooth", "alg5_scaled")
CSV_COLUMNS = ("iter", "i_k", "L_accepted", "S_k", "V_err", "norm_err", "objective", "bound_eq", "bound_value",
               "elapsed_s")
BOUND_FOR = {"alg1_ump": "eq13", "alg2_restart": "eq13_stage", "alg3_delta": "eq19", "alg4_smooth": "eq20",
             "alg5_scaled": "eq23"}
FIGURE_EPS_GRID = tuple(10.0 ** (-3 * i) for i in range(1, 9))


@dataclass
class ExperimentConfig:
    problem: dict
    solvers: list
    epsilon_grid: list
    delta: float = 0.01
    L0: float = 1.0
    mu: Optional[float] = None
    max_iters: int = 2000
    output_dir: str = "traces"
    desk_scale: bool = True
    output_mode: str = "last_z"
    format: str = "csv"
    tag: str = ""

    def __post_init__(self):
        if not self.solvers:
            raise ValueError("solver list is empty")
        unknown = [s for s in self.solvers if s not in SOLVER_NAMES]
        if unknown:
            raise ValueError(f"unknown solvers {unknown}; expected names from {SOLVER_NAMES}")
        if not self.epsilon_grid or any(not e > 0 for e in self.epsilon_grid):
            raise ValueError("epsilon grid must be a nonempty list of positive numbers")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        kind = self.problem.get("kind")
        if kind not in ("covering_ball", "minty"):
            raise ValueError(f"problem kind must be covering_ball or minty, got {kind!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    solver: str
    epsilon: float
    trace: Optional[Trace]
    path: Optional[Path]
    status: str
    error: str = ""
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# problem construction


def build_problem(problem: dict):
    """Returns ``(VIProblem, ProxSetup)`` for a problem description."""
    kind = problem["kind"]
    seed = int(problem.get("seed", 0))
    if kind == "covering_ball":
        cb = gen_covering_ball(seed, int(problem["n"]), int(problem["m"]), int(problem["s"]), problem.get("case", "Lomax10"),
                               dual_cap=float(problem.get("dual_cap", 10.0)),
                               primal_radius=float(problem.get("primal_radius", 5.0)))
        prob = covering_ball_problem(cb, mu=float(problem.get("mu", 2.0)))
        return prob, ProxSetup.origin(prob.dim)

    op = problem["operator"]
    n = int(problem["n"])
    r = float(problem.get("radius", 1.0))
    if op == "identity":
        prob = identity_problem(n, r)
    elif op == "diag":
        prob = diag_problem(n, r)
    elif op == "holder":
        prob = holder_problem(n, float(problem.get("hmu", 1.0)), float(problem.get("L_nu", 1.0)), float(problem.get("nu", 0.5)), r)
    elif op == "composite":
        m = int(problem.get("m", n))
        A = make_rng(seed + 1).standard_normal((n, m))
        sc = SaddleComposite(A, float(problem.get("mu_x", 0.5)), float(problem.get("mu_y", 0.5)))
        prob = composite_problem(sc, r)
    else:
        raise ValueError(f"unknown minty operator {op!r}")
    u = make_rng(seed).standard_normal(prob.dim)
    start = r * float(problem.get("start_fraction", 1.0)) * u / np.linalg.norm(u)
    return prob, ProxSetup(start)


def _restart_R0sq(prob: VIProblem, setup: ProxSetup) -> float:
    x0 = start_point(setup, prob.set)
    if prob.known_solution is not None:
        d = x0 - prob.known_solution
        return max(0.5 * float(d @ d), np.finfo(float).tiny)
    return max_bregman_radius(setup, prob.set)


def run_solver(name: str, prob: VIProblem, setup: ProxSetup, cfg: SolverConfig, use_kernels=None) -> Trace:
    if name == "alg1_ump":
        return ump_solve(prob, setup, cfg, use_kernels=use_kernels)
    if name == "alg2_restart":
        rcfg = RestartConfig(R0=math.sqrt(_restart_R0sq(prob, setup)), epsilon=cfg.epsilon, omega=setup.omega)
        return restarted_solve(prob, cfg, rcfg, start_point(setup, prob.set), use_kernels=use_kernels)
    fn = {"alg3_delta": adaptive_delta_solve, "alg4_smooth": adaptive_smooth_solve,
          "alg5_scaled": adaptive_scaled_delta_solve}[name]
    return fn(prob, setup, cfg, bound_target(), use_kernels=use_kernels)


def attach_bounds(trace: Trace, prob: VIProblem, setup: ProxSetup) -> Trace:
    """Fill the theoretical-bound column from the run's own L history.

    Without a known solution the bounds use the max Bregman radius of the set
    in place of ``V(x*, z0)``; that is an upper bound since ``x*`` lies in
    the set.  The per-stage bound of the restarted method needs ``x*``.
    """
    name = trace.algorithm
    eq = BOUND_FOR[name]
    mu = trace.meta["mu"]
    delta = 0.0 if name == "alg4_smooth" else trace.meta["delta"]
    xs = prob.known_solution
    if xs is not None:
        V0 = trace.V0
    elif prob.set.bounded:
        V0 = max_bregman_radius(setup, prob.set)
    else:
        V0 = math.nan
    n = len(trace)
    if name == "alg1_ump":
        values = V0 + delta * trace.S
    elif name == "alg2_restart":
        values = np.full(n, math.nan)
        start = 0
        S_before = 0.0
        for mk, Vp in zip(trace.restart_markers, trace.meta.get("stage_V_err", [])):
            stop = start + mk.n_iters
            if Vp is not None and math.isfinite(Vp):
                values[start:stop] = Vp + delta * (trace.S[start:stop] - S_before)
            S_before += mk.S_stage
            start = stop
    else:
        values = bound_path(trace.L, mu, delta, V0, eq) if n else np.empty(0)
    trace.bound_eq = eq
    trace.bound_value = np.asarray(values, dtype=np.float64)
    return trace


# ---------------------------------------------------------------------------
# trace files


def _num(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ""


def trace_to_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    bound = trace.bound_value
    for j in range(len(trace)):
        writer.writerow([
            int(trace.iters[j]),
            int(trace.trials[j]),
            _num(trace.L[j]),
            _num(trace.S[j]),
            _num(trace.V_err[j]),
            _num(trace.norm_err[j]),
            _num(trace.objective[j]),
            trace.bound_eq or "" if bound is not None and math.isfinite(bound[j]) else "",
            _num(bound[j]) if bound is not None else "",
            _num(trace.elapsed[j]),
        ])
    return buf.getvalue()


def _arr(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=np.float64)
    return [float(v) if math.isfinite(v) else None for v in a.reshape(-1)] if a.ndim == 1 else [_arr(r) for r in a]


def _unarr(a, ndim=1):
    if a is None:
        return None
    if ndim == 2:
        return np.asarray([_unarr(r) for r in a], dtype=np.float64).reshape(len(a), -1) if a else np.empty((0, 0))
    return np.asarray([math.nan if v is None else v for v in a], dtype=np.float64)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def trace_to_dict(trace: Trace) -> dict:
    return {
        "algorithm": trace.algorithm,
        "status": trace.status,
        "iters": [int(i) for i in trace.iters],
        "trials": [int(i) for i in trace.trials],
        "L": _arr(trace.L),
        "S": _arr(trace.S),
        "V_err": _arr(trace.V_err),
        "norm_err": _arr(trace.norm_err),
        "objective": _arr(trace.objective),
        "elapsed": _arr(trace.elapsed),
        "final": _arr(trace.final),
        "z0": _arr(trace.z0),
        "V0": _clean(float(trace.V0)),
        "z": _arr(trace.z),
        "w": _arr(trace.w),
        "restart_markers": [[m.stage, m.n_iters, m.R_sq, m.S_stage] for m in trace.restart_markers],
        "meta": _clean(dict(trace.meta)),
        "bound_eq": trace.bound_eq,
        "bound_value": _arr(trace.bound_value),
    }


def trace_from_dict(doc: dict) -> Trace:
    n = len(doc["z0"])
    z = doc.get("z")
    w = doc.get("w")
    return Trace(
        algorithm=doc["algorithm"],
        iters=np.asarray(doc["iters"], dtype=np.int64),
        trials=np.asarray(doc["trials"], dtype=np.int64),
        L=_unarr(doc["L"]),
        S=_unarr(doc["S"]),
        V_err=_unarr(doc["V_err"]),
        norm_err=_unarr(doc["norm_err"]),
        objective=_unarr(doc["objective"]),
        elapsed=_unarr(doc["elapsed"]),
        final=_unarr(doc["final"]),
        z0=_unarr(doc["z0"]),
        V0=math.nan if doc.get("V0") is None else float(doc["V0"]),
        z=None if z is None else (_unarr(z, 2) if z else np.empty((0, n))),
        w=None if w is None else (_unarr(w, 2) if w else np.empty((0, n))),
        restart_markers=[RestartMarker(int(a), int(b), float(c), float(d)) for a, b, c, d in doc["restart_markers"]],
        status=doc["status"],
        meta=doc.get("meta", {}),
        bound_eq=doc.get("bound_eq"),
        bound_value=_unarr(doc.get("bound_value")),
    )


def export_trace(trace: Trace, fmt: str, path, header: Optional[dict] = None) -> Path:
    """Write a trace as CSV (with a ``.meta.json`` sidecar) or as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _clean(dict(header or {}))
    if fmt == "csv":
        path.write_text(trace_to_csv_text(trace))
        sidecar = path.with_suffix(".meta.json")
        sidecar.write_text(json.dumps({"header": header, "algorithm": trace.algorithm, "status": trace.status,
                                       "meta": _clean(dict(trace.meta)),
                                       "restart_markers": [list(m) for m in trace.restart_markers]}, indent=1))
    elif fmt == "json":
        path.write_text(json.dumps({"header": header, "trace": trace_to_dict(trace)}))
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return path


def load_trace(path) -> Trace:
    with open(path) as fh:
        doc = json.load(fh)
    return trace_from_dict(doc["trace"] if "trace" in doc else doc)


def traces_equal(a: Trace, b: Trace, include_elapsed: bool = True) -> bool:
    def same(x, y):
        if x is None or y is None:
            return x is None and y is None
        x = np.asarray(x)
        y = np.asarray(y)
        return x.shape == y.shape and bool(np.array_equal(x, y, equal_nan=True))

    cols = ["iters", "trials", "L", "S", "V_err", "norm_err", "objective", "final", "z0", "z", "w", "bound_value"]
    if include_elapsed:
        cols.append("elapsed")
    if not all(same(getattr(a, c), getattr(b, c)) for c in cols):
        return False
    v0_same = (a.V0 == b.V0) or (math.isnan(a.V0) and math.isnan(b.V0))
    return (a.algorithm == b.algorithm and a.status == b.status and a.bound_eq == b.bound_eq and v0_same
            and list(a.restart_markers) == list(b.restart_markers) and a.meta == b.meta)


# ---------------------------------------------------------------------------
# orchestration


def _header(cfg: ExperimentConfig, solver: str, eps: float) -> dict:
    return {
        "config": cfg.to_dict(),
        "solver": solver,
        "epsilon": eps,
        "seed": cfg.problem.get("seed", 0),
        "versions": {"adaptvi": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def _file_stem(cfg: ExperimentConfig, solver: str, eps: float) -> str:
    prob = cfg.problem
    label = prob.get("operator") or prob.get("case", "cb")
    parts = [cfg.tag or prob["kind"], str(label)]
    if "radius" in prob:
        parts.append(f"r{prob['radius']:g}")
    parts += [solver, f"eps{eps:.0e}"]
    return "_".join(parts).replace("+", "")


def output_dir_for(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def run_experiment(cfg: ExperimentConfig, write: bool = True, use_kernels=None) -> list:
    """Run every ``(solver, epsilon)`` pair; failed solver runs are kept as failed results."""
    prob, setup = build_problem(cfg.problem)
    out_dir = output_dir_for(cfg)
    results = []
    for solver in cfg.solvers:
        for eps in cfg.epsilon_grid:
            scfg = SolverConfig(epsilon=float(eps), delta=cfg.delta, L0=cfg.L0, mu=cfg.mu, max_iters=cfg.max_iters,
                                output_mode=cfg.output_mode, keep_iterates=False)
            error = ""
            try:
                trace = run_solver(solver, prob, setup, scfg, use_kernels=use_kernels)
            except LineSearchError as exc:
                trace = exc.trace
                error = str(exc)
                log.warning("%s eps=%g failed: %s", solver, eps, exc)
            if trace is not None:
                attach_bounds(trace, prob, setup)
            path = None
            if write and trace is not None:
                suffix = ".csv" if cfg.format == "csv" else ".json"
                path = export_trace(trace, cfg.format, out_dir / (_file_stem(cfg, solver, eps) + suffix),
                                    _header(cfg, solver, eps))
            status = trace.status if trace is not None else "line_search_failed"
            results.append(RunResult(solver, float(eps), trace, path, status, error))
    return results


# ---------------------------------------------------------------------------
# presets

PRESETS = ("fig1_case1", "fig2_case2", "fig_vi_identity", "fig_vi_diag")

_SCALES = {
    "desk": {"cb_n": 1000, "cb_m": 10, "cb_s": 100, "vi_n": 10_000, "cb_iters": 1000, "vi_iters": 2000},
    "full": {"cb_n": 1_000_000, "cb_m": 10, "cb_s": 100, "vi_n": 1_000_000, "cb_iters": 20_000, "vi_iters": 20_000},
}

# Seeds for the preset instances.
PRESET_SEEDS = {"fig1_case1": 1, "fig2_case2": 2, "fig_vi_identity": 3, "fig_vi_diag": 4}


def preset_configs(name: str, scale: str = "desk", output_dir: str = "traces") -> list:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
    if scale not in _SCALES:
        raise ValueError("scale must be desk or full")
    sc = _SCALES[scale]
    seed = PRESET_SEEDS[name]
    common = dict(delta=0.01, L0=1.0, output_dir=output_dir, desk_scale=(scale == "desk"), tag=name)
    if name in ("fig1_case1", "fig2_case2"):
        case = "Lomax10" if name == "fig1_case1" else "ChiSq3"
        solvers = ["alg3_delta", "alg4_smooth", "alg5_scaled"]
        if name == "fig2_case2":
            solvers = ["alg2_restart"] + solvers
        problem = {"kind": "covering_ball", "case": case, "n": sc["cb_n"], "m": sc["cb_m"], "s": sc["cb_s"],
                   "seed": seed}
        return [ExperimentConfig(problem=problem, solvers=solvers, epsilon_grid=[1e-3], max_iters=sc["cb_iters"],
                                 **common)]
    eps_grid = list(FIGURE_EPS_GRID)
    if name == "fig_vi_identity":
        return [
            ExperimentConfig(problem={"kind": "minty", "operator": "identity", "n": sc["vi_n"], "radius": r,
                                      "seed": seed},
                             solvers=["alg2_restart", "alg3_delta", "alg4_smooth", "alg5_scaled"],
                             epsilon_grid=eps_grid, max_iters=sc["vi_iters"], **common)
            for r in (1.0, 2.0, 3.0)
        ]
    return [ExperimentConfig(problem={"kind": "minty", "operator": "diag", "n": sc["vi_n"], "radius": 1.0,
                                      "seed": seed},
                             solvers=["alg1_ump", "alg3_delta", "alg5_scaled"], epsilon_grid=eps_grid,
                             max_iters=sc["vi_iters"], **common)]


def reproduce_preset(name: str, scale: str = "desk", output_dir: str = "traces", write: bool = True,
                     use_kernels=None) -> list:
    results = []
    for cfg in preset_configs(name, scale, output_dir):
        for res in run_experiment(cfg, write=write, use_kernels=use_kernels):
            res.extra["problem"] = cfg.problem
            results.append(res)
    return results
