"""Plot scripts for alsfem convergence CSVs and mesh dumps."""

from .convergence import fit_slope, plot_convergence
from .io import cumulative_time, mesh_sizes, read_convergence, read_mesh_dump
from .meshplot import plot_mesh

__all__ = ["fit_slope", "plot_convergence", "plot_mesh", "read_convergence",
           "read_mesh_dump", "mesh_sizes", "cumulative_time"]
