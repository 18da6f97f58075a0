"""Log-log convergence plots with slope triangles from runner CSVs."""

from __future__ import annotations

import argparse

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import cumulative_time, read_convergence

# reproducible output: no timestamps, stable element ids
matplotlib.rcParams["svg.hashsalt"] = "alsfem-plots"
_SAVE_METADATA = {"svg": {"Date": None}, "png": {"Software": None}}


def fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Sign-flipped least-squares slope of log y against log x."""
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least 2 positive points for a slope fit")
    return float(-np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def add_slope_triangle(ax, slope: float, x0: float, x1: float,
                       y0: float) -> None:
    """Annotate a decay rate: right triangle below the data, hypotenuse
    dropping by x^(-slope) between x0 and x1."""
    y1 = y0 * (x1 / x0) ** -slope
    ax.plot([x0, x1, x1, x0], [y0, y0, y1, y0], color="0.3", lw=0.8)
    ax.text(np.sqrt(x0 * x1), y0 * 1.15, f"{slope:g}",
            ha="center", va="bottom", fontsize=8, color="0.3")


def plot_convergence(csv_specs, y_columns, out_path, x_column="ndof",
                     slopes=(), title=None, time_stat="mean"):
    """Render the overlay plot and return the fitted slope per curve.

    csv_specs is a list of (path, label); y_columns a list of CSV column
    names, with "time" meaning the cumulative phase total (min/max repeat
    statistics drawn as vertical error bars when present).
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    fitted = {}
    for path, label in csv_specs:
        data = read_convergence(path)
        x = cumulative_time(data, time_stat) if x_column == "time" \
            else data[x_column]
        for column in y_columns:
            name = f"{label}:{column}" if len(y_columns) > 1 else label
            if column == "time":
                y = cumulative_time(data, "mean")
                ax.plot(x, y, marker="o", ms=3, label=name)
                if "t_solve_min" in data:
                    lo = y - cumulative_time(data, "min")
                    hi = cumulative_time(data, "max") - y
                    ax.errorbar(x, y, yerr=[np.maximum(lo, 0),
                                            np.maximum(hi, 0)],
                                fmt="none", ecolor="0.5", capsize=2)
            else:
                y = data[column]
                ax.plot(x, y, marker="o", ms=3, label=name)
            fitted[name] = fit_slope(np.asarray(x), np.asarray(y))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_column)
    ax.set_ylabel(", ".join(y_columns))
    if title:
        ax.set_title(title)
    xlim = ax.get_xlim()
    ylim = ax.get_ylim()
    for slope in slopes:
        x0 = xlim[0] * (xlim[1] / xlim[0]) ** 0.55
        x1 = xlim[0] * (xlim[1] / xlim[0]) ** 0.85
        y0 = ylim[0] * (ylim[1] / ylim[0]) ** 0.35
        add_slope_triangle(ax, slope, x0, x1, y0)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", lw=0.3, alpha=0.4)
    fmt = str(out_path).rsplit(".", 1)[-1].lower()
    fig.savefig(out_path, metadata=_SAVE_METADATA.get(fmt),
                bbox_inches="tight")
    plt.close(fig)
    return fitted


def _parse_spec(spec: str):
    path, sep, label = spec.partition("=")
    return path, (label if sep else path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot-convergence",
        description="Log-log convergence plot from runner CSVs")
    parser.add_argument("csv", nargs="+", metavar="PATH[=LABEL]")
    parser.add_argument("--y", action="append", required=True,
                        help="CSV column, or 'time' for the cumulative "
                             "phase total (repeatable)")
    parser.add_argument("--x", default="ndof",
                        help="x column, or 'time' (default: ndof)")
    parser.add_argument("--slope", type=float, action="append", default=[],
                        help="slope-triangle annotation (repeatable)")
    parser.add_argument("--title", default=None)
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    fitted = plot_convergence([_parse_spec(s) for s in args.csv],
                              args.y, args.out, x_column=args.x,
                              slopes=args.slope, title=args.title)
    for name, slope in fitted.items():
        print(f"{name}: fitted slope {slope:.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
