"""CLI orchestration: runs, timing repeats, CSV and mesh-dump outputs."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import adaptivity, benchmarks

BASE_COLUMNS = ["level", "case", "n_triangles", "ndof", "eta_nat", "eta_sep",
                "eta_col", "mu", "osc", "ls_value", "err_grad", "err_flux_l2",
                "err_flux_div"]
TIMING_COLUMNS = ["t_solve", "t_estimate", "t_mark", "t_refine"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{value:.8e}"


def write_csv(path, runs: list) -> None:
    """Write per-level records; timing stats over repeats when there are any.

    runs is a list of record lists, one per repeat; non-timing columns must
    agree across repeats (the loop is deterministic).
    """
    repeat = len(runs)
    records = runs[0]
    header = list(BASE_COLUMNS)
    if repeat == 1:
        header += TIMING_COLUMNS
    else:
        for col in TIMING_COLUMNS:
            header += [f"{col}_mean", f"{col}_min", f"{col}_max"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, rec in enumerate(records):
            row = [rec.level, rec.case, rec.n_triangles, rec.ndof,
                   rec.eta_nat, rec.eta_sep, rec.eta_col, rec.mu, rec.osc,
                   rec.ls_value, rec.err_grad, rec.err_flux_l2,
                   rec.err_flux_div]
            if repeat == 1:
                row += [getattr(rec, col) for col in TIMING_COLUMNS]
            else:
                for col in TIMING_COLUMNS:
                    values = [getattr(run[i], col) for run in runs]
                    row += [float(np.mean(values)), min(values), max(values)]
            writer.writerow(_fmt(v) for v in row)


def read_csv(path) -> list:
    """Rows of a convergence CSV as dicts with floats where possible."""
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, val in raw.items():
                if key == "case":
                    row[key] = val
                elif val == "":
                    row[key] = None
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def fit_rate(rows, column: str, ndof_min: float = 0.0,
             ndof_max: float = math.inf) -> float:
    """Least-squares slope of log(value) vs log(ndof), sign-flipped.

    rows may be RunRecord objects or CSV dicts; only rows with ndof inside
    [ndof_min, ndof_max] and a positive value enter the fit.
    """
    xs, ys = [], []
    for row in rows:
        if isinstance(row, dict):
            ndof, value = row["ndof"], row[column]
        else:
            ndof, value = row.ndof, getattr(row, column)
        if value is None or value <= 0.0:
            continue
        if ndof_min <= ndof <= ndof_max:
            xs.append(math.log(ndof))
            ys.append(math.log(value))
    if len(xs) < 2:
        raise ValueError(
            f"need at least 2 rows in the ndof window, got {len(xs)}")
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alsfem-run",
        description="Adaptive least-squares FEM benchmark runner")
    parser.add_argument("--problem", required=True,
                        help="lshape | micro:<eps> (e.g. micro:3^-3) | waterfall")
    parser.add_argument("--algo", required=True,
                        choices=["nalsfem", "calsfem", "salsfem", "uniform"])
    parser.add_argument("--theta", type=float, default=0.5)
    parser.add_argument("--kappa", type=float, default=1.0)
    parser.add_argument("--rho", type=float, default=0.8)
    parser.add_argument("--varrho", type=float, default=1.0 - 1e-6)
    parser.add_argument("--max-ndof", type=int, default=1_000_000)
    parser.add_argument("--time-budget-sec", type=float, default=1800.0)
    parser.add_argument("--repeat", type=int, default=1,
                        help="rerun count for timing statistics")
    parser.add_argument("--quad-k", type=int, default=5)
    parser.add_argument("--refine-mode", choices=["edge", "bisec3"],
                        default=None)
    parser.add_argument("--aa-threshold",
                        choices=[adaptivity.MU_MAX, adaptivity.MU_TILDE_MAX],
                        default=adaptivity.MU_MAX)
    parser.add_argument("--aa-max-leaves", type=int, default=20_000_000,
                        help="abort if the data approximation exceeds this")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--dump-meshes", action="store_true")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        problem = benchmarks.make_problem(args.problem, quad_k=args.quad_k)
        mode = {"edge": "refinement_edge", "bisec3": "bisec3",
                None: None}[args.refine_mode]
        params = adaptivity.AdaptiveParams(
            theta=args.theta if args.algo != "uniform" else 1.0,
            kappa=args.kappa, rho=args.rho, varrho=args.varrho,
            max_ndof=args.max_ndof, time_budget_sec=args.time_budget_sec,
            quad_k=args.quad_k, refine_mode=mode,
            aa_threshold=args.aa_threshold,
            aa_max_leaves=args.aa_max_leaves)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    observer = None
    if args.dump_meshes:
        def observer(level, mesh, solution):
            (out_dir / f"mesh_L{level}.txt").write_text(mesh.dump())

    runs = []
    try:
        for rep in range(max(1, args.repeat)):
            runs.append(adaptivity.adaptive_loop(
                args.algo, problem, params,
                observer=observer if rep == 0 else None))
    except adaptivity.AdaptivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    write_csv(out_dir / "convergence.csv", runs)
    last = runs[0][-1]
    print(f"{args.algo} {args.problem}: {len(runs[0])} levels, "
          f"final ndof {last.ndof}, eta_nat {last.eta_nat:.6e}")
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
