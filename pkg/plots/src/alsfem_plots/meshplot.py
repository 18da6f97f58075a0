"""Triangulation plots colored by local mesh size."""

from __future__ import annotations

import argparse

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import PolyCollection

from .io import mesh_sizes, read_mesh_dump

matplotlib.rcParams["svg.hashsalt"] = "alsfem-plots"
_SAVE_METADATA = {"svg": {"Date": None}, "png": {"Software": None}}


def plot_mesh(dump_path, out_path, vmin=None, vmax=None, log_scale=True,
              edge_color="0.2", title=None):
    """Draw the triangles of a mesh dump, filled by h = sqrt(area).

    Explicit vmin/vmax pin the color scale so that several meshes can
    share one legend; by default the scale spans this mesh alone.
    """
    verts, tris = read_mesh_dump(dump_path)
    if tris.shape[0] == 0:
        raise ValueError(f"{dump_path}: no triangles")
    h = mesh_sizes(verts, tris)
    norm = matplotlib.colors.LogNorm(vmin=vmin or h.min(),
                                     vmax=vmax or h.max()) if log_scale \
        else matplotlib.colors.Normalize(vmin=vmin, vmax=vmax)
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    coll = PolyCollection(verts[tris], array=h, norm=norm,
                          cmap="viridis", edgecolors=edge_color,
                          linewidths=0.2)
    ax.add_collection(coll)
    ax.autoscale_view()
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.colorbar(coll, ax=ax, shrink=0.8, label="h")
    fmt = str(out_path).rsplit(".", 1)[-1].lower()
    fig.savefig(out_path, metadata=_SAVE_METADATA.get(fmt),
                bbox_inches="tight")
    plt.close(fig)
    return coll


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot-mesh",
        description="Render a mesh dump colored by local mesh size")
    parser.add_argument("dump", help="mesh_L<level>.txt file")
    parser.add_argument("--vmin", type=float, default=None,
                        help="shared color scale lower bound")
    parser.add_argument("--vmax", type=float, default=None,
                        help="shared color scale upper bound")
    parser.add_argument("--linear", action="store_true",
                        help="linear instead of logarithmic color scale")
    parser.add_argument("--title", default=None)
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    plot_mesh(args.dump, args.out, vmin=args.vmin, vmax=args.vmax,
              log_scale=not args.linear, title=args.title)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
