"""Command line entry point: ``adaptvi run|reproduce|export``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import PRESETS, ExperimentConfig, export_trace, load_trace, reproduce_preset, run_experiment


def _summary(results) -> list:
    rows = []
    for r in results:
        tr = r.trace
        n = len(tr) if tr is not None else 0
        rows.append({
            "solver": r.solver,
            "epsilon": r.epsilon,
            "status": r.status,
            "iterations": n,
            "final_norm_err": float(tr.norm_err[-1]) if n else None,
            "final_objective": float(tr.objective[-1]) if n else None,
            "path": str(r.path) if r.path else None,
            "error": r.error or None,
        })
    return rows


def _print_rows(rows, out) -> None:
    for row in rows:
        parts = [f"{row['solver']:<13}", f"eps={row['epsilon']:.0e}", f"{row['status']:<18}",
                 f"iters={row['iterations']}"]
        if row["final_norm_err"] is not None and row["final_norm_err"] == row["final_norm_err"]:
            parts.append(f"err={row['final_norm_err']:.4e}")
        if row["final_objective"] is not None and row["final_objective"] == row["final_objective"]:
            parts.append(f"obj={row['final_objective']:.6g}")
        if row["path"]:
            parts.append(row["path"])
        print("  ".join(parts), file=out)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json_file(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.format:
        cfg.format = args.format
    _print_rows(_summary(run_experiment(cfg)), sys.stdout)
    return 0


def cmd_reproduce(args) -> int:
    results = reproduce_preset(args.preset, args.scale, output_dir=args.output_dir or "traces")
    _print_rows(_summary(results), sys.stdout)
    return 0


def cmd_export(args) -> int:
    trace = load_trace(args.trace)
    with open(args.trace) as fh:
        header = json.load(fh).get("header", {})
    out = Path(args.out) if args.out else Path(args.trace).with_suffix("." + args.format)
    export_trace(trace, args.format, out, header)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptvi", description="Adaptive mirror-prox experiment runner.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a JSON config")
    p_run.add_argument("config", help="path to an ExperimentConfig JSON document")
    p_run.add_argument("--output-dir", help="override the config's output directory")
    p_run.add_argument("--format", choices=("csv", "json"), help="override the trace file format")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("reproduce", help="run one of the built-in figure presets")
    p_rep.add_argument("preset", choices=PRESETS)
    p_rep.add_argument("--scale", choices=("desk", "full"), default="desk")
    p_rep.add_argument("--output-dir", help="directory for trace files (default: traces)")
    p_rep.set_defaults(func=cmd_reproduce)

    p_exp = sub.add_parser("export", help="convert a JSON trace file to CSV or JSON")
    p_exp.add_argument("trace", help="JSON trace written by run/reproduce")
    p_exp.add_argument("--format", choices=("csv", "json"), default="csv")
    p_exp.add_argument("--out", help="output path (default: input path with the new suffix)")
    p_exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"adaptvi: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
