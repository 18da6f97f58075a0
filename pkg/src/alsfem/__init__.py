"""Adaptive least-squares finite element benchmarks for the 2D Poisson
first-order system: NVB mesh refinement, RT0 x P1 least-squares solver,
built-in and residual a-posteriori estimators, and collective/separate
marking strategies with optimal data approximation."""

__version__ = "0.1.0"
