"""Readers for the runner's convergence CSV and mesh dump formats."""

from __future__ import annotations

import csv

import numpy as np

TIMING_PHASES = ("t_solve", "t_estimate", "t_mark", "t_refine")


def read_convergence(path) -> dict:
    """Columns of a convergence CSV as float arrays (NaN for blanks).

    The `case` column stays a list of strings.  Timing columns may appear
    plain or as `_mean`/`_min`/`_max` triples depending on the repeat
    count of the run that wrote the file.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        raw = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                raw[name].append(row[name])
    out = {}
    for name, vals in raw.items():
        if name == "case":
            out[name] = vals
        else:
            out[name] = np.array(
                [float(v) if v != "" else np.nan for v in vals])
    return out


def cumulative_time(data: dict, stat: str = "mean") -> np.ndarray:
    """Cumulative wall time over levels, summed across the four phases.

    stat selects mean/min/max for CSVs with repeat statistics; single-run
    CSVs have one timing value per phase and ignore stat.
    """
    total = None
    for phase in TIMING_PHASES:
        col = phase if phase in data else f"{phase}_{stat}"
        if col not in data:
            raise KeyError(f"missing timing column for {phase}")
        total = data[col] if total is None else total + data[col]
    return np.cumsum(total)


def read_mesh_dump(path):
    """Vertices (n, 2) and triangles (m, 3) of a `mesh_L*.txt` dump."""
    verts, tris = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v" and len(parts) == 3:
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t" and len(parts) == 4:
                tris.append((int(parts[1]), int(parts[2]), int(parts[3])))
            else:
                raise ValueError(f"{path}:{lineno}: unrecognized line {line!r}")
    verts = np.array(verts, dtype=float).reshape(-1, 2)
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
        raise ValueError(f"{path}: triangle refers to a missing vertex")
    return verts, tris


def mesh_sizes(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Local mesh size h = sqrt(area) per triangle."""
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    cross = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
             - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    return np.sqrt(0.5 * np.abs(cross))
